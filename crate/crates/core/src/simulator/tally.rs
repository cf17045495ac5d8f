use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{DetectorPair, YieldSet};
use crate::model::{Detector, WindowClass};

/// Window counts and single-click counts for one class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub windows: u64,
    pub left: u64,
    pub right: u64,
}

impl ClassCounts {
    pub fn effective(&self) -> u64 {
        self.left + self.right
    }

    pub fn single(&self, detector: Detector) -> u64 {
        match detector {
            Detector::Left => self.left,
            Detector::Right => self.right,
        }
    }

    fn add(&mut self, other: &ClassCounts) {
        self.windows += other.windows;
        self.left += other.left;
        self.right += other.right;
    }
}

/// Disclosed test subset `v`, or the undisclosed remainder `u` (which also
/// holds the key pool).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subset {
    V,
    U,
}

impl Subset {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Subset::V => "v",
            Subset::U => "u",
        }
    }
}

/// Per-subset, per-class counters, plus the post-selection-accepted view.
///
/// Tallies form a commutative monoid under [`WindowTally::merge`]; the zero
/// tally (provenance 0) is the identity and is compatible with any tally.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowTally {
    pub provenance: u64,
    all: [[ClassCounts; 6]; 2],
    accepted: [[ClassCounts; 6]; 2],
}

impl Default for WindowTally {
    fn default() -> Self {
        Self::zero()
    }
}

impl WindowTally {
    pub fn zero() -> Self {
        Self::with_provenance(0)
    }

    pub fn with_provenance(provenance: u64) -> Self {
        Self {
            provenance,
            all: [[ClassCounts::default(); 6]; 2],
            accepted: [[ClassCounts::default(); 6]; 2],
        }
    }

    /// Record one window. `accepted` marks windows kept by post-selection,
    /// and `event` is the (possibly relabelled) outcome for the accepted view.
    pub fn record(
        &mut self,
        subset: Subset,
        class: WindowClass,
        left_only: bool,
        right_only: bool,
        accepted: Option<(bool, bool)>,
    ) {
        let c = &mut self.all[subset.index()][class.index()];
        c.windows += 1;
        c.left += left_only as u64;
        c.right += right_only as u64;
        if let Some((l, r)) = accepted {
            let a = &mut self.accepted[subset.index()][class.index()];
            a.windows += 1;
            a.left += l as u64;
            a.right += r as u64;
        }
    }

    pub fn counts(&self, subset: Subset, class: WindowClass) -> ClassCounts {
        self.all[subset.index()][class.index()]
    }

    pub fn accepted_counts(&self, subset: Subset, class: WindowClass) -> ClassCounts {
        self.accepted[subset.index()][class.index()]
    }

    /// Counts for a class, optionally restricted to a subset and to the
    /// post-selected windows.
    pub fn view(&self, subset: Option<Subset>, class: WindowClass, accepted: bool) -> ClassCounts {
        let table = if accepted { &self.accepted } else { &self.all };
        let mut out = ClassCounts::default();
        for s in [Subset::V, Subset::U] {
            if subset.is_none_or(|want| want == s) {
                out.add(&table[s.index()][class.index()]);
            }
        }
        out
    }

    pub fn total_windows(&self) -> u64 {
        self.all.iter().flatten().map(|c| c.windows).sum()
    }

    pub fn total_accepted(&self) -> u64 {
        self.accepted.iter().flatten().map(|c| c.windows).sum()
    }

    /// Field-wise sum. Fails when both tallies carry different non-zero
    /// provenance fingerprints.
    pub fn merge(&self, other: &WindowTally) -> Result<WindowTally> {
        let provenance = match (self.provenance, other.provenance) {
            (0, p) | (p, 0) => p,
            (a, b) if a == b => a,
            (a, b) => return Err(Error::ProvenanceMismatch { left: a, right: b }),
        };
        let mut out = self.clone();
        out.provenance = provenance;
        for s in 0..2 {
            for c in 0..6 {
                out.all[s][c].add(&other.all[s][c]);
                out.accepted[s][c].add(&other.accepted[s][c]);
            }
        }
        Ok(out)
    }

    /// Observed yields `S_y^d = n_y^d / n_y` for the real classes, the two
    /// single-sender classes pooled into Z~.
    pub fn yields(&self, subset: Option<Subset>, accepted: bool) -> Result<YieldSet> {
        let pair = |classes: &[WindowClass]| -> Result<DetectorPair> {
            let mut c = ClassCounts::default();
            for &class in classes {
                c.add(&self.view(subset, class, accepted));
            }
            if c.windows == 0 {
                return Err(Error::UndefinedRate("a window class has no windows"));
            }
            let n = c.windows as f64;
            Ok(DetectorPair {
                left: c.left as f64 / n,
                right: c.right as f64 / n,
            })
        };
        Ok(YieldSet {
            ztilde: pair(&[WindowClass::ZTildeA, WindowClass::ZTildeB])?,
            both: pair(&[WindowClass::BBoth])?,
            neither: pair(&[WindowClass::ONeither])?,
        })
    }

    /// Effective-window bit-flip error rate in the disclosed subset `v`.
    ///
    /// Z~ windows agree by construction of the bit convention; every effective
    /// B or O window is an error.
    pub fn bit_flip_error(&self, accepted: bool) -> Result<f64> {
        let eff = |class| self.view(Some(Subset::V), class, accepted).effective();
        let wrong = eff(WindowClass::BBoth) + eff(WindowClass::ONeither);
        let total = wrong + eff(WindowClass::ZTildeA) + eff(WindowClass::ZTildeB);
        if total == 0 {
            return Err(Error::UndefinedRate("no effective events in subset v"));
        }
        Ok(wrong as f64 / total as f64)
    }

    /// Rows `(class, detector, n_windows, n_effective, subset)` for CSV export.
    /// The accepted view is included when `with_accepted` is set.
    pub fn rows(&self, with_accepted: bool) -> Vec<TallyRow> {
        let mut rows = Vec::new();
        let views: &[bool] = if with_accepted { &[false, true] } else { &[false] };
        for &accepted in views {
            for subset in [Subset::V, Subset::U] {
                for class in WindowClass::ALL {
                    let c = if accepted {
                        self.accepted_counts(subset, class)
                    } else {
                        self.counts(subset, class)
                    };
                    if class.is_virtual() && c.windows == 0 {
                        continue;
                    }
                    for detector in [Detector::Left, Detector::Right] {
                        rows.push(TallyRow {
                            class: class.label(),
                            detector: detector.label(),
                            n_windows: c.windows,
                            n_effective: c.single(detector),
                            subset: match (subset, accepted) {
                                (Subset::V, false) => "v",
                                (Subset::U, false) => "u",
                                (Subset::V, true) => "v_accepted",
                                (Subset::U, true) => "u_accepted",
                            },
                        });
                    }
                }
            }
        }
        rows
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TallyRow {
    pub class: &'static str,
    pub detector: &'static str,
    pub n_windows: u64,
    pub n_effective: u64,
    pub subset: &'static str,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_tally() -> impl Strategy<Value = WindowTally> {
        proptest::collection::vec((0usize..2, 0usize..6, 0u8..4, any::<bool>()), 0..60).prop_map(
            |events| {
                let mut t = WindowTally::with_provenance(7);
                for (s, c, outcome, acc) in events {
                    let subset = if s == 0 { Subset::V } else { Subset::U };
                    let (l, r) = (outcome == 1, outcome == 2);
                    t.record(subset, WindowClass::ALL[c], l, r, acc.then_some((l, r)));
                }
                t
            },
        )
    }

    proptest! {
        #[test]
        fn merge_is_a_commutative_monoid(a in arb_tally(), b in arb_tally(), c in arb_tally()) {
            let zero = WindowTally::zero();
            prop_assert_eq!(a.merge(&zero).unwrap(), a.clone());
            prop_assert_eq!(zero.merge(&a).unwrap(), a.clone());
            prop_assert_eq!(a.merge(&b).unwrap(), b.merge(&a).unwrap());
            let left = a.merge(&b).unwrap().merge(&c).unwrap();
            let right = a.merge(&b.merge(&c).unwrap()).unwrap();
            prop_assert_eq!(left, right);
        }

        #[test]
        fn single_clicks_never_exceed_windows(a in arb_tally()) {
            for s in [Subset::V, Subset::U] {
                for class in WindowClass::ALL {
                    let c = a.counts(s, class);
                    prop_assert!(c.left + c.right <= c.windows);
                }
            }
        }
    }

    #[test]
    fn provenance_mismatch_rejected() {
        let a = WindowTally::with_provenance(1);
        let b = WindowTally::with_provenance(2);
        assert!(matches!(a.merge(&b), Err(Error::ProvenanceMismatch { .. })));
    }

    #[test]
    fn bit_flip_error_extremes() {
        let mut t = WindowTally::zero();
        t.record(Subset::V, WindowClass::ZTildeA, true, false, None);
        t.record(Subset::V, WindowClass::ZTildeB, false, true, None);
        t.record(Subset::U, WindowClass::BBoth, true, false, None);
        assert_eq!(t.bit_flip_error(false).unwrap(), 0.0);

        let mut t = WindowTally::zero();
        t.record(Subset::V, WindowClass::BBoth, true, false, None);
        t.record(Subset::V, WindowClass::BBoth, false, true, None);
        assert_eq!(t.bit_flip_error(false).unwrap(), 1.0);

        let mut t = WindowTally::zero();
        t.record(Subset::V, WindowClass::BBoth, false, false, None);
        assert!(matches!(t.bit_flip_error(false), Err(Error::UndefinedRate(_))));
    }
}
