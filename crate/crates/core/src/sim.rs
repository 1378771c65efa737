//! Euler–Maruyama simulation of the controlled diffusion on the junction,
//! `dx = b(x, k) dt + sigma(x) dW + dl`, with Walsh-type dispatch at the vertex.
//!
//! A step that overshoots below zero is reflected, `x <- |x'|`, and the local
//! time grows by the Skorokhod increment `x_new - x' = 2|x'|`, so that the
//! pathwise identity `x(t) = x(t0) + int b + int sigma dW + l(t)` holds on every
//! excursion. The new edge is drawn from `alpha(t)` frozen at the left end of
//! the step.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::junction::SimplexWeights;
use crate::pde::FeedbackPolicy;
use crate::problem::{ControlProblem, EdgePoint};

/// Anything that can drive the simulator: an edge control and junction weights.
pub trait ControlRule: Sync {
    fn edge_control(&self, t: f64, edge: usize, x: f64) -> f64;
    fn junction_weights(&self, t: f64) -> &[f64];
}

impl ControlRule for FeedbackPolicy {
    fn edge_control(&self, t: f64, edge: usize, x: f64) -> f64 {
        self.control(edge, self.level_at(t), self.node_at(x))
    }

    fn junction_weights(&self, t: f64) -> &[f64] {
        self.weights(self.level_at(t))
    }
}

/// Constant controls on each edge and constant junction weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantRule {
    pub controls: Vec<f64>,
    pub weights: SimplexWeights,
}

impl ControlRule for ConstantRule {
    fn edge_control(&self, _t: f64, edge: usize, _x: f64) -> f64 {
        self.controls[edge]
    }

    fn junction_weights(&self, _t: f64) -> &[f64] {
        &self.weights
    }
}

/// A base rule with the edge control and/or the junction weights replaced by constants.
pub struct OverrideRule<'a> {
    pub base: &'a dyn ControlRule,
    pub controls: Option<Vec<f64>>,
    pub weights: Option<SimplexWeights>,
}

impl ControlRule for OverrideRule<'_> {
    fn edge_control(&self, t: f64, edge: usize, x: f64) -> f64 {
        match &self.controls {
            Some(k) => k[edge],
            None => self.base.edge_control(t, edge, x),
        }
    }

    fn junction_weights(&self, t: f64) -> &[f64] {
        match &self.weights {
            Some(a) => a,
            None => self.base.junction_weights(t),
        }
    }
}

/// Counter-based stream: path `index` of `seed` always draws the same numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub index: u64,
}

impl RngStream {
    pub fn new(seed: u64, index: u64) -> Self {
        Self { seed, index }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.index);
        rng
    }
}

/// When a path stops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Run to `T` and add the terminal cost.
    Horizon,
    /// Stop at a fixed time `tau <= T`; no terminal cost.
    At(f64),
    /// Stop after the first reflection step, or at `tau`; no terminal cost.
    FirstHitOr(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub t0: f64,
    pub dt: f64,
    pub stop: StopRule,
    /// Band widths `eps` for the occupancy and band local-time tallies.
    pub bands: Vec<f64>,
    pub record_trace: bool,
}

impl SimulationConfig {
    pub fn new(t0: f64, dt: f64) -> Self {
        Self { t0, dt, stop: StopRule::Horizon, bands: Vec::new(), record_trace: false }
    }

    pub fn with_stop(mut self, stop: StopRule) -> Self {
        self.stop = stop;
        self
    }

    pub fn with_bands(mut self, bands: &[f64]) -> Self {
        self.bands = bands.to_vec();
        self
    }

    pub fn with_trace(mut self) -> Self {
        self.record_trace = true;
        self
    }

    /// Stop time and number of steps; `dt` must divide the simulated span.
    fn schedule(&self, problem: &ControlProblem) -> Result<(f64, usize)> {
        let t_end_max = problem.horizon.terminal_time;
        let end = match self.stop {
            StopRule::Horizon => t_end_max,
            StopRule::At(tau) | StopRule::FirstHitOr(tau) => tau,
        };
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidSimulation(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t0 >= problem.horizon.initial_time - 1e-12 && self.t0 <= end && end <= t_end_max + 1e-12) {
            return Err(Error::InvalidSimulation(format!(
                "need t0 <= stop time <= T, got t0 = {}, stop = {end}, T = {t_end_max}",
                self.t0
            )));
        }
        let span = end - self.t0;
        let steps = (span / self.dt).round();
        if (steps * self.dt - span).abs() > 1e-9 * span.max(1.0) {
            return Err(Error::InvalidSimulation(format!("dt = {} does not divide the span {span}", self.dt)));
        }
        Ok((end, steps as usize))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub time: f64,
    pub state: EdgePoint,
    pub local_time: f64,
}

/// Tallies for one band width `eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandTally {
    pub eps: f64,
    /// `int 1{x < eps} ds`
    pub occupancy: f64,
    /// `(1 / 2 eps) sum_j sigma_j(0)^2 int 1{0 <= x <= eps, edge = j} ds`
    pub band_local_time: f64,
}

/// One simulated trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub index: u64,
    pub total: f64,
    pub edge_cost: f64,
    pub junction_cost: f64,
    pub terminal_cost: f64,
    pub local_time: f64,
    pub junction_hits: u64,
    pub final_time: f64,
    pub final_state: EdgePoint,
    /// `sup_t x(t)^2`
    pub sup_sq: f64,
    pub bands: Vec<BandTally>,
    /// Edge choices made at the vertex.
    pub dispatch: Vec<u64>,
    /// Empty unless tracing was requested.
    pub trace: Vec<TracePoint>,
}

fn sample_edge<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &a) in weights.iter().enumerate() {
        acc += a;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

pub fn simulate_path<R: ControlRule + ?Sized>(
    problem: &ControlProblem,
    rule: &R,
    start: EdgePoint,
    config: &SimulationConfig,
    stream: RngStream,
) -> Result<PathSample> {
    if start.edge >= problem.edge_count() || !(start.x >= 0.0) {
        return Err(Error::InvalidSimulation(format!("start point {start:?} is not on the junction")));
    }
    let (end, steps) = config.schedule(problem)?;
    let span = end - config.t0;
    let dt = if steps == 0 { 0.0 } else { span / steps as f64 };
    let sqrt_dt = dt.sqrt();
    let h0 = problem.junction_hamiltonian();
    let vertex_sigma_sq: Vec<f64> = problem.edges.iter().map(|e| e.sigma(0.0).powi(2)).collect();
    let mut rng = stream.rng();

    let (mut edge, mut x) = (start.edge, start.x);
    let (mut edge_cost, mut junction_cost, mut local_time) = (0.0, 0.0, 0.0);
    let mut hits = 0u64;
    let mut sup_sq = x * x;
    let mut dispatch = vec![0u64; problem.edge_count()];
    let mut occupancy_count = vec![0usize; config.bands.len()];
    let mut band_sum = vec![0.0; config.bands.len()];
    let mut trace = Vec::new();
    if config.record_trace {
        trace.push(TracePoint { time: config.t0, state: EdgePoint::new(edge, x), local_time });
    }

    let mut taken = 0;
    for k in 0..steps {
        let t = config.t0 + k as f64 * dt;
        if x == 0.0 {
            edge = sample_edge(&mut rng, rule.junction_weights(t));
            dispatch[edge] += 1;
            if let Some(last) = trace.last_mut() {
                // at the vertex the recorded edge is the one just chosen
                last.state.edge = edge;
            }
        }
        for (b, &eps) in config.bands.iter().enumerate() {
            if x < eps {
                occupancy_count[b] += 1;
            }
            if x <= eps {
                band_sum[b] += vertex_sigma_sq[edge];
            }
        }

        let dynamics = &problem.edges[edge];
        let control = rule.edge_control(t, edge, x);
        let c = dynamics.eval_coefficients(x, control);
        edge_cost += c.cost * dt;
        let xi: f64 = rng.sample(StandardNormal);
        let next = x + c.drift * dt + c.sigma * sqrt_dt * xi;
        if !next.is_finite() {
            return Err(Error::NonFinite {
                context: format!("path {} at step {k} (t = {t}, edge {}, x = {x})", stream.index, edge + 1),
            });
        }
        taken = k + 1;
        if next < 0.0 {
            let dl = -2.0 * next;
            let alpha = rule.junction_weights(t);
            local_time += dl;
            junction_cost += h0.cost(alpha) * dl;
            hits += 1;
            x = -next;
            edge = sample_edge(&mut rng, alpha);
            dispatch[edge] += 1;
        } else {
            x = next;
        }
        sup_sq = sup_sq.max(x * x);
        if config.record_trace {
            trace.push(TracePoint {
                time: config.t0 + (k + 1) as f64 * dt,
                state: EdgePoint::new(edge, x),
                local_time,
            });
        }
        if matches!(config.stop, StopRule::FirstHitOr(_)) && next < 0.0 {
            break;
        }
    }

    let final_time = if taken == steps { end } else { config.t0 + taken as f64 * dt };
    let terminal_cost = match config.stop {
        StopRule::Horizon => problem.terminal.value(edge, x),
        _ => 0.0,
    };
    let bands = config
        .bands
        .iter()
        .enumerate()
        .map(|(b, &eps)| BandTally {
            eps,
            occupancy: if steps == 0 { 0.0 } else { occupancy_count[b] as f64 / steps as f64 * span },
            band_local_time: band_sum[b] * dt / (2.0 * eps),
        })
        .collect();
    Ok(PathSample {
        index: stream.index,
        total: edge_cost + junction_cost + terminal_cost,
        edge_cost,
        junction_cost,
        terminal_cost,
        local_time,
        junction_hits: hits,
        final_time,
        final_state: EdgePoint::new(edge, x),
        sup_sq,
        bands,
        dispatch,
        trace,
    })
}

/// Paths in path-index order.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub seed: u64,
    pub paths: Vec<PathSample>,
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Sample mean and standard error of a per-path statistic, summed in path order.
    pub fn mean_and_se(&self, f: impl Fn(&PathSample) -> f64) -> (f64, f64) {
        let n = self.paths.len() as f64;
        let mean = self.paths.iter().map(&f).sum::<f64>() / n;
        if self.paths.len() < 2 {
            return (mean, 0.0);
        }
        let var = self.paths.iter().map(|p| (f(p) - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    }

    /// Total dispatch counts per edge.
    pub fn dispatch_counts(&self) -> Vec<u64> {
        let edges = self.paths.first().map_or(0, |p| p.dispatch.len());
        let mut counts = vec![0; edges];
        for p in &self.paths {
            for (c, d) in counts.iter_mut().zip(&p.dispatch) {
                *c += d;
            }
        }
        counts
    }
}

fn check_ensemble(n_paths: usize) -> Result<()> {
    if n_paths == 0 {
        return Err(Error::InvalidSimulation("an ensemble needs at least one path".into()));
    }
    Ok(())
}

/// Single-threaded ensemble; identical output to the parallel version.
pub fn simulate_ensemble_sequential<R: ControlRule + ?Sized>(
    problem: &ControlProblem,
    rule: &R,
    start: EdgePoint,
    config: &SimulationConfig,
    n_paths: usize,
    seed: u64,
) -> Result<Ensemble> {
    check_ensemble(n_paths)?;
    let paths = (0..n_paths as u64)
        .map(|k| simulate_path(problem, rule, start, config, RngStream::new(seed, k)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble { seed, paths })
}

/// Data-parallel ensemble; results are collected in path-index order.
#[cfg(feature = "parallel")]
pub fn simulate_ensemble_parallel<R: ControlRule + ?Sized>(
    problem: &ControlProblem,
    rule: &R,
    start: EdgePoint,
    config: &SimulationConfig,
    n_paths: usize,
    seed: u64,
) -> Result<Ensemble> {
    use rayon::prelude::*;
    check_ensemble(n_paths)?;
    let paths = (0..n_paths as u64)
        .into_par_iter()
        .map(|k| simulate_path(problem, rule, start, config, RngStream::new(seed, k)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble { seed, paths })
}

/// Parallel when the `parallel` feature is on, sequential otherwise.
pub fn simulate_ensemble<R: ControlRule + ?Sized>(
    problem: &ControlProblem,
    rule: &R,
    start: EdgePoint,
    config: &SimulationConfig,
    n_paths: usize,
    seed: u64,
) -> Result<Ensemble> {
    #[cfg(feature = "parallel")]
    {
        simulate_ensemble_parallel(problem, rule, start, config, n_paths, seed)
    }
    #[cfg(not(feature = "parallel"))]
    {
        simulate_ensemble_sequential(problem, rule, start, config, n_paths, seed)
    }
}

/// Band estimate of `l(T)`. Uses the tally recorded during simulation, or
/// recomputes it from the trace when `eps` was not tallied.
pub fn band_local_time(path: &PathSample, eps: f64, problem: &ControlProblem) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidSimulation(format!("band width must be positive, got {eps}")));
    }
    if let Some(tally) = path.bands.iter().find(|b| b.eps == eps) {
        return Ok(tally.band_local_time);
    }
    if path.trace.len() < 2 {
        return Err(Error::InvalidSimulation(format!("band width {eps} was not tallied and no trace was recorded")));
    }
    let mut sum = 0.0;
    for w in path.trace.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.state.x <= eps {
            sum += problem.edges[a.state.edge].sigma(0.0).powi(2) * (b.time - a.time);
        }
    }
    Ok(sum / (2.0 * eps))
}

/// Mean over paths of the time spent in `[0, eps)`.
pub fn occupancy_fraction(ensemble: &Ensemble, eps: f64) -> Result<f64> {
    if ensemble.is_empty() {
        return Err(Error::InvalidSimulation("empty ensemble".into()));
    }
    let mut sum = 0.0;
    for p in &ensemble.paths {
        let tally = p
            .bands
            .iter()
            .find(|b| b.eps == eps)
            .ok_or_else(|| Error::InvalidSimulation(format!("band width {eps} was not tallied")))?;
        sum += tally.occupancy;
    }
    Ok(sum / ensemble.len() as f64)
}

/// `path,total,edge_cost,junction_cost,terminal_cost,local_time,junction_hits`.
pub fn write_ensemble_csv<W: Write>(ensemble: &Ensemble, out: &mut W) -> Result<()> {
    writeln!(out, "path,total,edge_cost,junction_cost,terminal_cost,local_time,junction_hits")?;
    for p in &ensemble.paths {
        writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{:e},{}",
            p.index, p.total, p.edge_cost, p.junction_cost, p.terminal_cost, p.local_time, p.junction_hits
        )?;
    }
    Ok(())
}

/// `path,time,edge,x,local_time` for every traced path.
pub fn write_trace_csv<W: Write>(paths: &[PathSample], out: &mut W) -> Result<()> {
    writeln!(out, "path,time,edge,x,local_time")?;
    for p in paths {
        for s in &p.trace {
            writeln!(out, "{},{:e},{},{:e},{:e}", p.index, s.time, s.state.edge + 1, s.state.x, s.local_time)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Diffusion, EdgeFamily};
    use crate::testutil::{folded_normal_mean, quadratic_junction_problem, reflected_problem};
    use proptest::prelude::*;

    fn constant(problem: &ControlProblem) -> ConstantRule {
        ConstantRule { controls: vec![0.0; problem.edge_count()], weights: SimplexWeights::uniform(problem.edge_count()) }
    }

    #[test]
    fn deterministic_drift_path() {
        let mut p = reflected_problem();
        p.edges[0].diffusion = Diffusion::Constant { value: 0.0 };
        p.edges[0].dynamics = EdgeFamily::Constant { drift: 1.0, cost: 0.0 };
        let cfg = SimulationConfig::new(0.0, 0.1).with_trace();
        let path = simulate_path(&p, &constant(&p), EdgePoint::new(0, 0.5), &cfg, RngStream::new(1, 0)).unwrap();
        assert_eq!(path.trace.len(), 11);
        for s in &path.trace {
            assert!((s.state.x - (0.5 + s.time)).abs() < 1e-12);
            assert_eq!(s.local_time, 0.0);
        }
        assert_eq!(path.junction_hits, 0);
        assert!((path.terminal_cost - 1.5).abs() < 1e-12);
    }

    #[test]
    fn same_stream_same_path() {
        let p = quadratic_junction_problem();
        let rule = constant(&p);
        let cfg = SimulationConfig::new(0.0, 0.01).with_bands(&[0.1]).with_trace();
        let a = simulate_path(&p, &rule, EdgePoint::vertex(), &cfg, RngStream::new(7, 3)).unwrap();
        let b = simulate_path(&p, &rule, EdgePoint::vertex(), &cfg, RngStream::new(7, 3)).unwrap();
        assert_eq!(a, b);
        let c = simulate_path(&p, &rule, EdgePoint::vertex(), &cfg, RngStream::new(7, 4)).unwrap();
        assert_ne!(a.total, c.total);
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let p = quadratic_junction_problem();
        let rule = constant(&p);
        let cfg = SimulationConfig::new(0.0, 0.01);
        let a = simulate_ensemble(&p, &rule, EdgePoint::vertex(), &cfg, 64, 11).unwrap();
        let b = simulate_ensemble_sequential(&p, &rule, EdgePoint::vertex(), &cfg, 64, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dt_must_divide_the_horizon() {
        let p = reflected_problem();
        let cfg = SimulationConfig::new(0.0, 0.3);
        assert!(simulate_path(&p, &constant(&p), EdgePoint::vertex(), &cfg, RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn band_zero_when_far_from_vertex_and_full_when_wide() {
        let mut p = reflected_problem();
        p.edges[0].diffusion = Diffusion::Constant { value: 0.0 };
        p.edges[0].dynamics = EdgeFamily::Constant { drift: 1.0, cost: 0.0 };
        let cfg = SimulationConfig::new(0.0, 0.01).with_bands(&[0.2, 10.0]).with_trace();
        let path = simulate_path(&p, &constant(&p), EdgePoint::new(0, 1.0), &cfg, RngStream::new(0, 0)).unwrap();
        assert_eq!(band_local_time(&path, 0.2, &p).unwrap(), 0.0);
        assert_eq!(path.bands[1].occupancy, 1.0);
        let ens = Ensemble { seed: 0, paths: vec![path] };
        assert_eq!(occupancy_fraction(&ens, 0.2).unwrap(), 0.0);
        assert_eq!(occupancy_fraction(&ens, 10.0).unwrap(), 1.0);
    }

    #[test]
    fn trace_recomputation_matches_tally() {
        let p = quadratic_junction_problem();
        let rule = constant(&p);
        let cfg = SimulationConfig::new(0.0, 0.001).with_bands(&[0.05]).with_trace();
        let path = simulate_path(&p, &rule, EdgePoint::vertex(), &cfg, RngStream::new(3, 0)).unwrap();
        let mut untallied = path.clone();
        untallied.bands.clear();
        let a = band_local_time(&path, 0.05, &p).unwrap();
        let b = band_local_time(&untallied, 0.05, &p).unwrap();
        assert!((a - b).abs() <= 1e-9 * a.max(1.0), "{a} vs {b}");
    }

    #[test]
    fn short_reflected_ensemble_local_time() {
        let p = reflected_problem();
        let rule = constant(&p);
        let cfg = SimulationConfig::new(0.0, 1e-3);
        let ens = simulate_ensemble(&p, &rule, EdgePoint::vertex(), &cfg, 4000, 5).unwrap();
        let (mean, se) = ens.mean_and_se(|s| s.local_time);
        assert!((mean - folded_normal_mean()).abs() <= 4.0 * se, "{mean} +- {se}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn pathwise_invariants(seed: u64, index in 0u64..1000, start_x in 0.0f64..1.0) {
            let p = quadratic_junction_problem();
            let rule = ConstantRule { controls: vec![0.5, -1.0, 2.0], weights: SimplexWeights::vertex(3, 0.1, 1) };
            let cfg = SimulationConfig::new(0.0, 0.01).with_trace();
            let path = simulate_path(&p, &rule, EdgePoint::new(0, start_x), &cfg, RngStream::new(seed, index)).unwrap();
            prop_assert_eq!(path.trace[0].local_time, 0.0);
            let mut hits = 0;
            for w in path.trace.windows(2) {
                prop_assert!(w[1].state.x >= 0.0);
                prop_assert!(w[1].local_time >= w[0].local_time);
                if w[1].local_time > w[0].local_time {
                    hits += 1;
                }
            }
            prop_assert_eq!(hits, path.junction_hits);
            prop_assert_eq!(path.total, path.edge_cost + path.junction_cost + path.terminal_cost);
        }
    }
}
