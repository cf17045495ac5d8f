//! Protocol, channel and detector parameters, plus the window taxonomy shared
//! by every other module.
//!
//! Each party independently decides to send a coherent pulse of mean photon
//! number `mu` with probability `q`. A window is classified by the pair of
//! decisions; the untagged, key-generating class is the one where exactly one
//! party sends.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// How the residual phase between the two pulses is handled at Charlie.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PhaseMode {
    /// Charlie removes the announced global phases; residual phase is zero.
    #[default]
    Compensation,
    /// Phases are random; Alice and Bob keep windows with
    /// `1 - |cos(gamma_B - gamma_A)| <= lambda_ps`.
    #[serde(alias = "postselection")]
    PostSelection,
}

impl std::str::FromStr for PhaseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "compensation" => Ok(PhaseMode::Compensation),
            "postselection" => Ok(PhaseMode::PostSelection),
            _ => Err(invalid("phase_mode", format!("unknown mode `{s}`"))),
        }
    }
}

/// Source and decision parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolParams {
    /// Mean photon number of a sent pulse.
    pub mu: f64,
    /// Per-party sending probability.
    pub q: f64,
    /// Post-selection acceptance |lambda|; ignored in compensation mode.
    #[serde(default = "default_lambda")]
    pub lambda_ps: f64,
    /// Error-correction efficiency factor.
    #[serde(default = "default_f")]
    pub f: f64,
    pub n_windows: u64,
    #[serde(default)]
    pub phase_mode: PhaseMode,
    /// Fraction of windows disclosed for testing (subset v).
    #[serde(default = "default_test_fraction")]
    pub test_fraction_v: f64,
}

fn default_lambda() -> f64 {
    0.05
}
fn default_f() -> f64 {
    1.1
}
fn default_test_fraction() -> f64 {
    0.1
}

impl ProtocolParams {
    pub fn new(mu: f64, q: f64, n_windows: u64) -> Self {
        Self {
            mu,
            q,
            lambda_ps: default_lambda(),
            f: default_f(),
            n_windows,
            phase_mode: PhaseMode::Compensation,
            test_fraction_v: default_test_fraction(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(invalid("mu", format!("must be > 0, got {}", self.mu)));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(invalid("q", format!("must lie in (0, 1), got {}", self.q)));
        }
        if !(0.0..=1.0).contains(&self.lambda_ps) {
            return Err(invalid(
                "lambda_ps",
                format!("must lie in [0, 1], got {}", self.lambda_ps),
            ));
        }
        if !(self.f.is_finite() && self.f >= 1.0) {
            return Err(invalid("f", format!("must be >= 1, got {}", self.f)));
        }
        if self.n_windows < 1 {
            return Err(invalid("n_windows", "must be >= 1"));
        }
        if !(self.test_fraction_v > 0.0 && self.test_fraction_v < 1.0) {
            return Err(invalid(
                "test_fraction_v",
                format!("must lie in (0, 1), got {}", self.test_fraction_v),
            ));
        }
        Ok(())
    }

    /// P(Z~) = 2q(1-q), both single-sender classes merged.
    pub fn ztilde_prior(&self) -> f64 {
        2.0 * self.q * (1.0 - self.q)
    }

    pub fn both_prior(&self) -> f64 {
        self.q * self.q
    }

    pub fn neither_prior(&self) -> f64 {
        (1.0 - self.q) * (1.0 - self.q)
    }
}

/// Fiber and detector description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    /// Alice-Bob fiber length in km.
    pub distance_km: f64,
    #[serde(default = "default_loss")]
    pub loss_db_per_km: f64,
    #[serde(default = "default_eta_det")]
    pub eta_det: f64,
    /// Dark-count probability per detector per window.
    #[serde(default = "default_dark")]
    pub p_dark: f64,
    /// Single-photon-interference misalignment error rate.
    #[serde(default)]
    pub e_a: f64,
    /// Charlie's position as a fraction of the Alice-Bob distance, measured
    /// from Alice.
    #[serde(default = "default_position")]
    pub charlie_position: f64,
}

fn default_loss() -> f64 {
    0.2
}
fn default_eta_det() -> f64 {
    0.8
}
fn default_dark() -> f64 {
    1e-11
}
fn default_position() -> f64 {
    0.5
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            distance_km: 0.0,
            loss_db_per_km: default_loss(),
            eta_det: default_eta_det(),
            p_dark: default_dark(),
            e_a: 0.0,
            charlie_position: default_position(),
        }
    }
}

impl ChannelParams {
    pub fn at_distance(distance_km: f64, e_a: f64) -> Self {
        Self {
            distance_km,
            e_a,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.distance_km.is_finite() && self.distance_km >= 0.0) {
            return Err(invalid("distance_km", "must be a finite value >= 0"));
        }
        if !(self.loss_db_per_km.is_finite() && self.loss_db_per_km >= 0.0) {
            return Err(invalid("loss_db_per_km", "must be >= 0"));
        }
        if !(self.eta_det > 0.0 && self.eta_det <= 1.0) {
            return Err(invalid(
                "eta_det",
                format!("must lie in (0, 1], got {}", self.eta_det),
            ));
        }
        if !(0.0..=1.0).contains(&self.p_dark) {
            return Err(invalid("p_dark", format!("must lie in [0, 1], got {}", self.p_dark)));
        }
        if !(0.0..=0.5).contains(&self.e_a) {
            return Err(invalid("e_a", format!("must lie in [0, 0.5], got {}", self.e_a)));
        }
        if !(0.0..=1.0).contains(&self.charlie_position) {
            return Err(invalid("charlie_position", "must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn is_symmetric(&self) -> bool {
        self.charlie_position == 0.5
    }
}

/// Per-arm transmittance, detector efficiency included, for Alice's arm.
///
/// `eta_det * 10^(-loss_db_per_km * L_A / 10)` where `L_A` is Alice's share of
/// the fiber (half of it with Charlie at the midpoint).
pub fn arm_transmittance(ch: &ChannelParams) -> f64 {
    arm_transmittances(ch).0
}

/// (Alice arm, Bob arm) transmittances.
pub fn arm_transmittances(ch: &ChannelParams) -> (f64, f64) {
    let arm = |len: f64| ch.eta_det * 10f64.powf(-ch.loss_db_per_km * len / 10.0);
    let alice_len = ch.distance_km * ch.charlie_position;
    (arm(alice_len), arm(ch.distance_km - alice_len))
}

/// Window classes. The first four occur in the real protocol; `XPlus` and
/// `XMinus` only exist in the virtual protocol run by the oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WindowClass {
    /// Alice sends, Bob does not.
    ZTildeA,
    /// Bob sends, Alice does not.
    ZTildeB,
    BBoth,
    ONeither,
    XPlus,
    XMinus,
}

impl WindowClass {
    pub const ALL: [WindowClass; 6] = [
        WindowClass::ZTildeA,
        WindowClass::ZTildeB,
        WindowClass::BBoth,
        WindowClass::ONeither,
        WindowClass::XPlus,
        WindowClass::XMinus,
    ];

    pub const REAL: [WindowClass; 4] = [
        WindowClass::ZTildeA,
        WindowClass::ZTildeB,
        WindowClass::BBoth,
        WindowClass::ONeither,
    ];

    pub fn from_decisions(alice_sends: bool, bob_sends: bool) -> Self {
        match (alice_sends, bob_sends) {
            (true, false) => WindowClass::ZTildeA,
            (false, true) => WindowClass::ZTildeB,
            (true, true) => WindowClass::BBoth,
            (false, false) => WindowClass::ONeither,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_virtual(self) -> bool {
        matches!(self, WindowClass::XPlus | WindowClass::XMinus)
    }

    pub fn is_ztilde(self) -> bool {
        matches!(self, WindowClass::ZTildeA | WindowClass::ZTildeB)
    }

    /// Alice's bit is 1 when she sends, Bob's bit is 0 when he sends, so the
    /// bits agree exactly in the single-sender classes.
    pub fn bits_agree(self) -> bool {
        self.is_ztilde()
    }

    /// Which parties put light into the channel.
    pub fn senders(self) -> Option<(bool, bool)> {
        match self {
            WindowClass::ZTildeA => Some((true, false)),
            WindowClass::ZTildeB => Some((false, true)),
            WindowClass::BBoth => Some((true, true)),
            WindowClass::ONeither => Some((false, false)),
            WindowClass::XPlus | WindowClass::XMinus => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            WindowClass::ZTildeA => "ztilde_a",
            WindowClass::ZTildeB => "ztilde_b",
            WindowClass::BBoth => "both",
            WindowClass::ONeither => "neither",
            WindowClass::XPlus => "x_plus",
            WindowClass::XMinus => "x_minus",
        }
    }
}

/// Charlie's announced outcome for one window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DetectorEvent {
    pub left_click: bool,
    pub right_click: bool,
}

impl DetectorEvent {
    /// One and only one detector clicked.
    pub fn is_effective(self) -> bool {
        self.left_click != self.right_click
    }
}

/// Detector label for single-click events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Detector {
    Left,
    Right,
}

impl Detector {
    pub fn label(self) -> &'static str {
        match self {
            Detector::Left => "L",
            Detector::Right => "R",
        }
    }
}

/// Prior probability of a real window class.
pub fn window_class_prior(params: &ProtocolParams, class: WindowClass) -> Result<f64> {
    let q = params.q;
    match class {
        WindowClass::ZTildeA | WindowClass::ZTildeB => Ok(q * (1.0 - q)),
        WindowClass::BBoth => Ok(params.both_prior()),
        WindowClass::ONeither => Ok(params.neither_prior()),
        WindowClass::XPlus | WindowClass::XMinus => Err(Error::VirtualClass(class)),
    }
}

/// Knobs that are not part of the protocol itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelOptions {
    /// Per-window intensity drawn uniformly from `[(1 - j) mu, mu]`. Zero
    /// means every pulse has exactly `mu`.
    pub intensity_jitter: f64,
    /// In post-selection mode, swap detector labels for accepted windows with
    /// `cos(delta) < 0`.
    pub relabel_antiphase: bool,
    /// Remove disclosed test windows from the key pool when computing `n_F`.
    pub subtract_test_windows: bool,
    /// Quadrature nodes for the post-selection phase average.
    pub quadrature_nodes: usize,
    /// Number of independent RNG streams the simulator splits the windows into.
    pub shards: u32,
    /// Prefactor of the bound-gap term in the phase-flip upper bound.
    pub phase_prefactor: PhaseFlipPrefactor,
}

/// `(1 + e^{-mu})` follows from counting X+ windows among X windows; the
/// `(1 + e^{-2 mu})` variant is kept for comparison only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PhaseFlipPrefactor {
    #[default]
    OnePlusExpMinusMu,
    OnePlusExpMinusTwoMu,
}

impl PhaseFlipPrefactor {
    pub fn value(self, mu: f64) -> f64 {
        match self {
            PhaseFlipPrefactor::OnePlusExpMinusMu => 1.0 + (-mu).exp(),
            PhaseFlipPrefactor::OnePlusExpMinusTwoMu => 1.0 + (-2.0 * mu).exp(),
        }
    }
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            intensity_jitter: 0.0,
            relabel_antiphase: true,
            subtract_test_windows: false,
            quadrature_nodes: 1024,
            shards: 16,
            phase_prefactor: PhaseFlipPrefactor::default(),
        }
    }
}

impl ModelOptions {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.intensity_jitter) {
            return Err(invalid("intensity_jitter", "must lie in [0, 1]"));
        }
        if self.quadrature_nodes < 1024 {
            return Err(invalid("quadrature_nodes", "must be >= 1024"));
        }
        if self.shards == 0 {
            return Err(invalid("shards", "must be >= 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(q: f64) -> ProtocolParams {
        ProtocolParams::new(0.5, q, 1000)
    }

    #[test]
    fn priors_match_worked_values() {
        let p = params(0.5);
        assert_eq!(window_class_prior(&p, WindowClass::BBoth).unwrap(), 0.25);
        assert_eq!(p.ztilde_prior(), 0.5);
        let p = params(0.1);
        let o = window_class_prior(&p, WindowClass::ONeither).unwrap();
        assert!((o - 0.81).abs() < 1e-15);
    }

    #[test]
    fn priors_partition_unity() {
        for q in [1e-6, 0.01, 0.3, 0.5, 0.77, 0.999999] {
            let p = params(q);
            let total: f64 = WindowClass::REAL
                .iter()
                .map(|&c| window_class_prior(&p, c).unwrap())
                .sum();
            assert!((total - 1.0).abs() < 1e-15, "q={q} total={total}");
        }
    }

    #[test]
    fn virtual_classes_have_no_prior() {
        let p = params(0.3);
        assert_eq!(
            window_class_prior(&p, WindowClass::XPlus),
            Err(Error::VirtualClass(WindowClass::XPlus))
        );
        assert!(window_class_prior(&p, WindowClass::XMinus).is_err());
    }

    #[test]
    fn transmittance_follows_fiber_formula() {
        let mut ch = ChannelParams::at_distance(0.0, 0.0);
        ch.eta_det = 1.0;
        assert_eq!(arm_transmittance(&ch), 1.0);

        // 0.2 dB/km over 50 km per arm: 10 dB.
        let ch = ChannelParams::at_distance(100.0, 0.0);
        assert!((arm_transmittance(&ch) - 0.08).abs() < 1e-15);
        let ch = ChannelParams::at_distance(200.0, 0.0);
        assert!((arm_transmittance(&ch) - 0.008).abs() < 1e-15);
    }

    #[test]
    fn transmittance_at_total_ten_to_minus_l_over_100() {
        // 0.1 dB/km gives a total fiber transmittance of 10^(-L/100) split
        // across the two arms.
        let mut ch = ChannelParams::at_distance(100.0, 0.0);
        ch.loss_db_per_km = 0.1;
        let eta = arm_transmittance(&ch);
        assert!((eta - 0.8 * 10f64.powf(-0.5)).abs() < 1e-15);
        assert!((eta - 0.25298).abs() < 1e-5);
        assert!((eta * eta - 0.64e-1).abs() < 1e-15);
        ch.distance_km = 200.0;
        assert!((arm_transmittance(&ch) - 0.08).abs() < 1e-15);
    }

    #[test]
    fn transmittance_monotone_and_linear_in_efficiency() {
        let mut prev = f64::INFINITY;
        for l in (0..=400).step_by(10) {
            let eta = arm_transmittance(&ChannelParams::at_distance(l as f64, 0.0));
            assert!(eta < prev);
            prev = eta;
        }
        let mut a = ChannelParams::at_distance(73.0, 0.0);
        a.eta_det = 0.4;
        let mut b = a.clone();
        b.eta_det = 0.8;
        assert!((2.0 * arm_transmittance(&a) - arm_transmittance(&b)).abs() < 1e-15);
    }

    #[test]
    fn validation_names_the_field() {
        let mut p = params(0.3);
        p.q = 1.2;
        match p.validate() {
            Err(Error::InvalidParameter { field, .. }) => assert_eq!(field, "q"),
            other => panic!("unexpected {other:?}"),
        }
        let mut ch = ChannelParams::default();
        ch.p_dark = -1.0;
        assert!(matches!(
            ch.validate(),
            Err(Error::InvalidParameter { field: "p_dark", .. })
        ));
    }

    #[test]
    fn unknown_json_fields_rejected() {
        let json = r#"{"mu":0.5,"q":0.3,"n_windows":10,"qq":1}"#;
        assert!(serde_json::from_str::<ProtocolParams>(json).is_err());
        let json = r#"{"mu":0.5,"q":0.3,"n_windows":10,"phase_mode":"post_selection"}"#;
        let p: ProtocolParams = serde_json::from_str(json).unwrap();
        assert_eq!(p.phase_mode, PhaseMode::PostSelection);
        assert_eq!(p.test_fraction_v, 0.1);
    }

    #[test]
    fn effective_event_needs_exactly_one_click() {
        let ev = |l, r| DetectorEvent {
            left_click: l,
            right_click: r,
        };
        assert!(ev(true, false).is_effective());
        assert!(ev(false, true).is_effective());
        assert!(!ev(true, true).is_effective());
        assert!(!ev(false, false).is_effective());
    }
}
