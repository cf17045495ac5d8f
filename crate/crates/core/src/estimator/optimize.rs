//! Coarse-to-fine grid search for the source parameters that maximise the
//! analytic key rate.
//!
//! The rate surface has large flat zero regions, so the search stays on grids:
//! a log-spaced coarse grid, then a few rounds of local refinement around the
//! incumbent. Grid points are evaluated in parallel and reduced with a total
//! order (rate, then lexicographically smaller `(q, mu, lambda)`), so the
//! result does not depend on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{acceptance, analytic_yields, estimate_bounds, expected_bit_flip_error, key_rate, KeyRateReport};
use crate::error::Result;
use crate::model::{ChannelParams, ModelOptions, PhaseMode, ProtocolParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerGrid {
    pub q_range: (f64, f64),
    pub mu_range: (f64, f64),
    pub lambda_range: (f64, f64),
    pub q_points: usize,
    pub mu_points: usize,
    pub lambda_points: usize,
    /// Local refinement rounds after the coarse pass.
    pub refinements: usize,
    /// Points per axis in each refinement round.
    pub refine_points: usize,
}

impl Default for OptimizerGrid {
    fn default() -> Self {
        Self {
            q_range: (1e-3, 0.9),
            mu_range: (1e-6, 1.0),
            lambda_range: (0.005, 0.3),
            q_points: 36,
            mu_points: 49,
            lambda_points: 10,
            refinements: 3,
            refine_points: 9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub q: f64,
    pub mu: f64,
    pub lambda: Option<f64>,
    pub report: KeyRateReport,
    pub evaluations: usize,
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 || lo == hi {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Log-spaced points spanning one coarse step either side of `centre`.
fn around(centre: f64, step: f64, range: (f64, f64), n: usize) -> Vec<f64> {
    let lo = (centre.ln() - step).exp().max(range.0);
    let hi = (centre.ln() + step).exp().min(range.1);
    log_space(lo, hi, n)
}

fn log_step(range: (f64, f64), n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        (range.1.ln() - range.0.ln()) / (n - 1) as f64
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    q: f64,
    mu: f64,
    lambda: Option<f64>,
    report: KeyRateReport,
}

impl Candidate {
    fn key(&self) -> (f64, f64, f64) {
        (self.q, self.mu, self.lambda.unwrap_or(0.0))
    }

    /// Total order used for the reduction.
    fn better_than(&self, other: &Candidate) -> bool {
        let (a, b) = (self.report.rate_per_window, other.report.rate_per_window);
        if a != b {
            return a > b;
        }
        self.key().partial_cmp(&other.key()) == Some(std::cmp::Ordering::Less)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Optimizer {
    pub grid: OptimizerGrid,
    pub options: ModelOptions,
    /// Window count used for `n_F` in the reported optimum.
    pub n_windows: u64,
}

impl Optimizer {
    pub fn new(grid: OptimizerGrid, options: ModelOptions, n_windows: u64) -> Self {
        Self {
            grid,
            options,
            n_windows: n_windows.max(1),
        }
    }

    fn params(&self, q: f64, mu: f64, lambda: Option<f64>, f: f64, mode: PhaseMode) -> ProtocolParams {
        let mut p = ProtocolParams::new(mu, q, self.n_windows.max(1));
        p.f = f;
        p.phase_mode = mode;
        if let Some(l) = lambda {
            p.lambda_ps = l;
        }
        p
    }

    /// Key rates for every `q` at one `(mu, lambda)`; the yields and the
    /// phase-flip bound do not depend on `q`.
    fn column(
        &self,
        ch: &ChannelParams,
        f: f64,
        mode: PhaseMode,
        mu: f64,
        lambda: Option<f64>,
        qs: &[f64],
    ) -> Vec<Candidate> {
        let base = self.params(qs[0], mu, lambda, f, mode);
        let prepared = analytic_yields(&base, ch, &self.options).and_then(|y| {
            let b = estimate_bounds(&y, mu, self.options.phase_prefactor)?;
            Ok((y, b, acceptance(&base)?))
        });
        qs.iter()
            .map(|&q| {
                let params = self.params(q, mu, lambda, f, mode);
                let report = prepared
                    .as_ref()
                    .ok()
                    .and_then(|(y, b, acc)| {
                        let e_z = expected_bit_flip_error(y, &params).ok()?;
                        key_rate(y, e_z, b.e_ph_upper, &params, *acc, self.options.subtract_test_windows).ok()
                    })
                    .unwrap_or_else(|| zero_report(&params));
                Candidate { q, mu, lambda, report }
            })
            .collect()
    }

    fn search(
        &self,
        ch: &ChannelParams,
        f: f64,
        mode: PhaseMode,
        qs: &[f64],
        mus: &[f64],
        lambdas: &[Option<f64>],
    ) -> (Candidate, usize) {
        let pairs: Vec<(f64, Option<f64>)> = mus
            .iter()
            .flat_map(|&m| lambdas.iter().map(move |&l| (m, l)))
            .collect();
        let best = pairs
            .par_iter()
            .map(|&(mu, lambda)| {
                self.column(ch, f, mode, mu, lambda, qs)
                    .into_iter()
                    .reduce(|a, b| if b.better_than(&a) { b } else { a })
                    .expect("non-empty q grid")
            })
            .reduce_with(|a, b| if b.better_than(&a) { b } else { a })
            .expect("non-empty grid");
        (best, pairs.len() * qs.len())
    }

    pub fn optimize(&self, ch: &ChannelParams, f: f64, mode: PhaseMode) -> Result<OptimizeResult> {
        ch.validate()?;
        let g = &self.grid;
        let lambda_axis = |pts: Vec<f64>| -> Vec<Option<f64>> {
            match mode {
                PhaseMode::Compensation => vec![None],
                PhaseMode::PostSelection => pts.into_iter().map(Some).collect(),
            }
        };
        let qs = log_space(g.q_range.0, g.q_range.1, g.q_points);
        let mus = log_space(g.mu_range.0, g.mu_range.1, g.mu_points);
        let lambdas = lambda_axis(log_space(g.lambda_range.0, g.lambda_range.1, g.lambda_points));
        let (mut best, mut evaluations) = self.search(ch, f, mode, &qs, &mus, &lambdas);

        let mut steps = (
            log_step(g.q_range, g.q_points),
            log_step(g.mu_range, g.mu_points),
            log_step(g.lambda_range, g.lambda_points),
        );
        if best.report.rate_per_window > 0.0 {
            for _ in 0..g.refinements {
                let qs = around(best.q, steps.0, g.q_range, g.refine_points);
                let mus = around(best.mu, steps.1, g.mu_range, g.refine_points);
                let lambdas = lambda_axis(match best.lambda {
                    Some(l) => around(l, steps.2, g.lambda_range, g.refine_points),
                    None => vec![],
                });
                let (cand, n) = self.search(ch, f, mode, &qs, &mus, &lambdas);
                evaluations += n;
                if cand.better_than(&best) {
                    best = cand;
                }
                let shrink = 2.0 / (g.refine_points.max(2) - 1) as f64;
                steps = (steps.0 * shrink, steps.1 * shrink, steps.2 * shrink);
            }
        }
        Ok(OptimizeResult {
            q: best.q,
            mu: best.mu,
            lambda: best.lambda,
            report: best.report,
            evaluations,
        })
    }
}

fn zero_report(params: &ProtocolParams) -> KeyRateReport {
    KeyRateReport {
        e_z: 0.5,
        e_ph_upper: 1.0,
        s_ztilde: 0.0,
        s_total: 0.0,
        acceptance: 0.0,
        n_f: 0.0,
        rate_per_window: 0.0,
        no_key: true,
        params: params.clone(),
    }
}

/// Optimise with the default grid and options.
pub fn optimize(ch: &ChannelParams, f: f64, phase_mode: PhaseMode) -> Result<OptimizeResult> {
    Optimizer::new(OptimizerGrid::default(), ModelOptions::default(), 1).optimize(ch, f, phase_mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::evaluate;

    #[test]
    fn ideal_short_link_keys() {
        let mut ch = ChannelParams::at_distance(0.0, 0.0);
        ch.eta_det = 1.0;
        ch.p_dark = 0.0;
        let r = optimize(&ch, 1.1, PhaseMode::Compensation).unwrap();
        assert!(r.report.rate_per_window > 0.0);
        assert!(!r.report.no_key);
    }

    #[test]
    fn optimum_dominates_coarse_grid() {
        let ch = ChannelParams::at_distance(80.0, 0.1);
        let opt = Optimizer::default();
        let best = optimize(&ch, 1.1, PhaseMode::Compensation).unwrap();
        let g = OptimizerGrid::default();
        for q in log_space(g.q_range.0, g.q_range.1, 12) {
            for mu in log_space(g.mu_range.0, g.mu_range.1, 12) {
                let p = opt.params(q, mu, None, 1.1, PhaseMode::Compensation);
                let rate = evaluate(&p, &ch, &ModelOptions::default())
                    .map(|(_, r)| r.rate_per_window)
                    .unwrap_or(0.0);
                assert!(best.report.rate_per_window >= rate, "q={q} mu={mu}");
            }
        }
    }

    #[test]
    fn hopeless_channel_reports_zero() {
        let ch = ChannelParams::at_distance(1000.0, 0.5);
        let r = optimize(&ch, 1.1, PhaseMode::Compensation).unwrap();
        assert_eq!(r.report.rate_per_window, 0.0);
        assert!(r.report.no_key);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let ch = ChannelParams::at_distance(120.0, 0.1);
        let a = optimize(&ch, 1.1, PhaseMode::Compensation).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| optimize(&ch, 1.1, PhaseMode::Compensation).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn post_selection_mode_finds_a_lambda() {
        let mut grid = OptimizerGrid::default();
        grid.q_points = 12;
        grid.mu_points = 16;
        grid.lambda_points = 5;
        grid.refinements = 1;
        grid.refine_points = 5;
        let opt = Optimizer::new(grid, ModelOptions::default(), 1);
        let r = opt
            .optimize(&ChannelParams::at_distance(20.0, 0.0), 1.1, PhaseMode::PostSelection)
            .unwrap();
        assert!(r.lambda.is_some());
        assert!(r.report.rate_per_window > 0.0);
        assert!(r.report.acceptance < 1.0);
    }
}
