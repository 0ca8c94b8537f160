//! Process (I) and (II) runs on the exact and free-fermion paths.

use std::time::Instant;

use serde::Serialize;

use crate::drive::{certify_drive, DriveReport};
use crate::error::{Error, Result};
use crate::fock::{hopping_hamiltonian, number_operator, second_quantize, LatticeSpec, Operator};
use crate::linalg::{c, CMatrix, C64};
use crate::observables::{self, exact_record, ProcessRecord};
use crate::propagator::{self, Propagator, TimeDependentHamiltonian};
use crate::quadratic::fast::FastProcess;
use crate::quadratic::{gibbs_correlation, QuadraticModel};
use crate::thermo::{self, evolve_state, gibbs_state, DensityMatrix};

use super::config::{MethodKind, PathChoice, ProtocolKind, RunConfig, CYCLE_PHASES};
use super::manifest::{RunManifest, Summary, Verdict, Window};

/// Frozen regression bound on the Process (I) probe-deviation decay ratio.
pub const PROCESS_I_DECAY_BOUND: f64 = 0.15;
/// Late-window mean `|Ṡ|` over the run maximum.
pub const PROCESS_I_SDOT_BOUND: f64 = 0.2;
/// Last over first cycle distance.
pub const PROCESS_II_RATIO_BOUND: f64 = 0.25;
/// Upper bound on the rank correlation of `d_n` against `n`.
pub const PROCESS_II_SPEARMAN_BOUND: f64 = -0.8;

/// Smallest lattice on which the convergence surrogates are asserted rather
/// than only reported.
pub const CONVERGENCE_MIN_SITES: usize = 100;

/// `S(t) − S(t₀)` may dip this far below zero.
pub const SECOND_LAW_TOL: f64 = 1e-8;
pub const TWO_ROUTE_TOL: f64 = 1e-8;
pub const CHARGE_TOL: f64 = 1e-8;
pub const FIRST_LAW_TOL: f64 = 1e-4;
pub const ORACLE_TOL: f64 = 1e-7;

/// Local one-body probes: `n_i` for `i = j`, `a_i* a_j + a_j* a_i` otherwise.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeSet {
    pairs: Vec<(usize, usize)>,
}

impl ProbeSet {
    /// Every `n_i` and every symmetrized hop inside the local region.
    pub fn default_for(lattice: &LatticeSpec) -> Self {
        let r = lattice.local_region();
        let mut pairs: Vec<(usize, usize)> = r.iter().map(|&i| (i, i)).collect();
        for (a, &i) in r.iter().enumerate() {
            for &j in &r[a + 1..] {
                pairs.push((i, j));
            }
        }
        Self { pairs }
    }

    pub fn from_pairs(pairs: &[[usize; 2]], lattice: &LatticeSpec) -> Result<Self> {
        for &[i, j] in pairs {
            if !(lattice.contains_local(i) && lattice.contains_local(j)) {
                return Err(Error::Config(format!("probe ({i}, {j}) leaves the local region")));
            }
        }
        Ok(Self {
            pairs: pairs.iter().map(|&[i, j]| (i.min(j), i.max(j))).collect(),
        })
    }

    pub fn for_config(cfg: &RunConfig) -> Result<Self> {
        let lattice = cfg.lattice()?;
        match &cfg.output.probes {
            Some(p) => Self::from_pairs(p, &lattice),
            None => Ok(Self::default_for(&lattice)),
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Probe values from any accessor `(i, j) ↦ Γ_ij = ⟨a_i* a_j⟩`.
    pub fn values_with<F: Fn(usize, usize) -> C64>(&self, gamma: F) -> Vec<f64> {
        self.pairs
            .iter()
            .map(|&(i, j)| if i == j { gamma(i, i).re } else { 2.0 * gamma(i, j).re })
            .collect()
    }

    /// The probes as Fock-space operators.
    pub fn fock_operators(&self, lattice: &LatticeSpec) -> Result<Vec<Operator>> {
        let l = lattice.sites();
        self.pairs
            .iter()
            .map(|&(i, j)| {
                let mut w = CMatrix::zeros(l, l);
                w[(i, j)] += c(1.0);
                if i != j {
                    w[(j, i)] += c(1.0);
                }
                second_quantize(lattice, &w)
            })
            .collect()
    }
}

/// `max_k |a_k − b_k|`.
pub fn max_deviation(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Ledger rows plus probe values along the output grid.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub records: Vec<ProcessRecord>,
    pub probes: Vec<Vec<f64>>,
    /// Probe values in the comparison state (Gibbs state of `H_∞`), Process I.
    pub probe_reference: Option<Vec<f64>>,
    /// von Neumann entropy of the evolved state (exact path only).
    pub state_entropy: Vec<f64>,
    /// Final correlation-matrix spectrum bounds (quadratic path only).
    pub occupation_bounds: Option<(f64, f64)>,
    pub steps: usize,
    pub rejected: usize,
    pub final_state: Option<DensityMatrix>,
}

/// One output-grid step of the exact propagator.
fn exact_step(h: &TimeDependentHamiltonian, s: f64, t: f64, cfg: &RunConfig) -> Result<Propagator> {
    match cfg.integrator.method {
        MethodKind::Direct => propagator::propagate(h, s, t, cfg.integrator.tol),
        MethodKind::Dyson => {
            let ui = propagator::dyson_propagator(h, s, t, cfg.integrator.dyson_order, cfg.integrator.tol, None)?;
            propagator::interaction_to_schrodinger(&ui, h.h0(), s, t)
        }
    }
}

/// Exact Fock-space trajectory on the configured grid.
pub fn exact_trajectory(cfg: &RunConfig) -> Result<Trajectory> {
    let lattice = cfg.lattice()?;
    lattice.require_exact()?;
    let p = cfg.gibbs;
    let protocol = cfg.build_protocol(true)?;
    let h0 = hopping_hamiltonian(&lattice)?;
    let n = number_operator(&lattice)?;
    let probe_set = ProbeSet::for_config(cfg)?;
    let probe_ops = probe_set.fock_operators(&lattice)?;
    let probe_reference = match cfg.drive.protocol {
        ProtocolKind::SwitchOn => {
            let h_inf = &h0 + &protocol.w_fock(&[1.0])?;
            let g = gibbs_state(&h_inf.certify()?, &n, &p)?;
            Some(probe_ops.iter().map(|a| g.rho.expect(a)).collect())
        }
        ProtocolKind::Periodic => None,
    };
    let h = TimeDependentHamiltonian::new(h0.clone(), protocol, &lattice)?;
    let mut rho = gibbs_state(&h0, &n, &p)?.rho;
    let times = cfg.times();
    let mut out = Trajectory {
        probe_reference,
        ..Default::default()
    };
    for (k, &t) in times.iter().enumerate() {
        if k > 0 {
            let u = exact_step(&h, times[k - 1], t, cfg)?;
            rho = evolve_state(&rho, &u)?;
        }
        out.records.push(exact_record(t, &rho, &h, &n, &p)?);
        out.probes.push(probe_ops.iter().map(|a| rho.expect(a)).collect());
        out.state_entropy.push(thermo::von_neumann_entropy(&rho)?);
    }
    out.final_state = Some(rho);
    Ok(out)
}

/// Free-fermion trajectory via the low-rank interaction-picture stepper.
pub fn quadratic_trajectory(cfg: &RunConfig) -> Result<Trajectory> {
    let lattice = cfg.lattice()?;
    let p = cfg.gibbs;
    let protocol = cfg.build_protocol(false)?;
    let probe_set = ProbeSet::for_config(cfg)?;
    let region = lattice.local_region().to_vec();
    let slot = |site: usize| region.iter().position(|&r| r == site).expect("probe inside region");
    let probe_reference = match cfg.drive.protocol {
        ProtocolKind::SwitchOn => {
            let model = QuadraticModel::new(lattice.clone(), None, p)?;
            let w_inf = protocol.w_one_body(&[1.0])?;
            let g = gibbs_correlation(&(&model.h0 + w_inf), &p)?;
            Some(probe_set.values_with(|i, j| g.matrix()[(i, j)]))
        }
        ProtocolKind::Periodic => None,
    };
    let model = QuadraticModel::new(lattice, Some(protocol), p)?;
    let mut fast = FastProcess::new(&model, cfg.t0(), cfg.integrator.tol, cfg.lambda_range())?;
    let mut out = Trajectory {
        probe_reference,
        ..Default::default()
    };
    for &t in &cfg.times() {
        fast.advance_to(t)?;
        out.records.push(fast.record()?);
        let gamma = fast.local_correlation();
        out.probes.push(probe_set.values_with(|i, j| gamma[(slot(i), slot(j))]));
    }
    let occ = fast.full_correlation().occupations();
    out.occupation_bounds = Some((occ[0], occ[occ.len() - 1]));
    (out.steps, out.rejected) = fast.steps();
    Ok(out)
}

/// Fills `d_probe`: distance to the `H_∞` Gibbs state (Process I) or to
/// the state one period earlier (Process II, zero during the first period).
pub fn fill_probe_deviation(traj: &mut Trajectory, cfg: &RunConfig) {
    let per = cfg.points_per_period();
    for k in 0..traj.records.len() {
        traj.records[k].d_probe = match (&traj.probe_reference, per) {
            (Some(r), _) => max_deviation(&traj.probes[k], r),
            (None, Some(m)) if k >= m => max_deviation(&traj.probes[k], &traj.probes[k - m]),
            _ => 0.0,
        };
    }
}

/// Indices of grid points with `t ≤ window_end`.
fn window_len(records: &[ProcessRecord], window_end: f64) -> usize {
    records.iter().take_while(|r| r.t <= window_end + 1e-9).count()
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Process (I) convergence surrogate inside the recurrence window.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProcessIAnalysis {
    /// Mean `D` over the first quarter after `t₀ + 3τ_r`.
    pub early_deviation: f64,
    /// Mean `D` over the last quarter of the window.
    pub late_deviation: f64,
    pub decay_ratio: f64,
    pub sdot_max: f64,
    pub sdot_late_mean: f64,
    pub sdot_ratio: f64,
    pub max_deviation: f64,
}

pub fn analyze_process_i(records: &[ProcessRecord], t0: f64, tau_r: f64, window_end: f64) -> Result<ProcessIAnalysis> {
    let inside = &records[..window_len(records, window_end)];
    let end = inside.last().map(|r| r.t).unwrap_or(t0);
    let start = t0 + 3.0 * tau_r;
    let quarter = (end - start) / 4.0;
    if !(quarter > 0.0) {
        return Err(Error::Config(format!(
            "recurrence window ends at {end}, before t0 + 3 tau_r = {start}"
        )));
    }
    let early = mean(inside.iter().filter(|r| r.t >= start && r.t < start + quarter).map(|r| r.d_probe));
    let late = mean(inside.iter().filter(|r| r.t >= end - quarter).map(|r| r.d_probe));
    let sdot_max = inside.iter().map(|r| r.sdot.abs()).fold(0.0, f64::max);
    let sdot_late = mean(inside.iter().filter(|r| r.t >= end - quarter).map(|r| r.sdot.abs()));
    Ok(ProcessIAnalysis {
        early_deviation: early,
        late_deviation: late,
        decay_ratio: if early > 0.0 { late / early } else { 0.0 },
        sdot_max,
        sdot_late_mean: sdot_late,
        sdot_ratio: if sdot_max > 0.0 { sdot_late / sdot_max } else { 0.0 },
        max_deviation: inside.iter().map(|r| r.d_probe).fold(0.0, f64::max),
    })
}

/// Process (II) cycle distances inside the recurrence window.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProcessIIAnalysis {
    /// `d_n = max_{phase, probe} |⟨A⟩(t₀+nT+τ) − ⟨A⟩(t₀+(n+1)T+τ)|`.
    pub cycle_distance: Vec<f64>,
    pub ratio: f64,
    pub spearman: f64,
    /// Every sampled phase `τ(t)` was reconstructed inside `[0, T)`.
    pub phases_consistent: bool,
}

pub fn analyze_process_ii(
    records: &[ProcessRecord],
    probes: &[Vec<f64>],
    t0: f64,
    period: f64,
    points_per_period: usize,
    window_end: f64,
) -> Result<ProcessIIAnalysis> {
    let usable = window_len(records, window_end);
    let step = points_per_period / CYCLE_PHASES;
    let mut cycle_distance = Vec::new();
    let mut phases_consistent = true;
    for n in 0.. {
        let last = (n + 1) * points_per_period + (CYCLE_PHASES - 1) * step;
        if last >= usable {
            break;
        }
        let mut d = 0.0f64;
        for j in 0..CYCLE_PHASES {
            let k = n * points_per_period + j * step;
            let (_, tau) = crate::drive::decompose_time(records[k].t - t0, period);
            phases_consistent &= (0.0..period).contains(&tau);
            d = d.max(max_deviation(&probes[k], &probes[k + points_per_period]));
        }
        cycle_distance.push(d);
    }
    if cycle_distance.len() < 2 {
        return Err(Error::Config("fewer than two cycle distances fit the recurrence window".into()));
    }
    let first = cycle_distance[0];
    let last = *cycle_distance.last().expect("nonempty");
    let index: Vec<f64> = (0..cycle_distance.len()).map(|n| n as f64).collect();
    Ok(ProcessIIAnalysis {
        ratio: if first > 0.0 { last / first } else { 0.0 },
        spearman: spearman(&index, &cycle_distance),
        cycle_distance,
        phases_consistent,
    })
}

/// Average ranks (ties share the mean rank).
fn ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let avg = 0.5 * (i + j) as f64 + 1.0;
        for &o in &order[i..=j] {
            r[o] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation; NaN when either input is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let mx = mean(rx.iter().copied());
    let my = mean(ry.iter().copied());
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Trajectory-level invariants shared by both paths.
pub fn trajectory_verdicts(traj: &Trajectory, cfg: &RunConfig, label: &str, report: &DriveReport) -> Result<(Vec<Verdict>, f64)> {
    let recs = &traj.records;
    let mut v = Vec::new();
    let s0 = recs[0].s;
    let dip = recs.iter().map(|r| r.s - s0).fold(f64::INFINITY, f64::min);
    v.push(Verdict::at_least(&format!("{label}.second_law_start"), dip, -SECOND_LAW_TOL));
    let two_route = recs.iter().map(|r| (r.sdot - r.sdot_decomposition).abs()).fold(0.0, f64::max);
    v.push(Verdict::at_most(
        &format!("{label}.entropy_rate_two_route"),
        two_route,
        TWO_ROUTE_TOL,
    ));
    let trace_route = recs.iter().map(|r| (r.s - r.s_trace).abs()).fold(0.0, f64::max);
    v.push(Verdict::at_most(
        &format!("{label}.entropy_trace_route"),
        trace_route,
        TWO_ROUTE_TOL,
    ));
    if report.charge_conserving {
        let q0 = recs[0].q;
        let drift = recs.iter().map(|r| (r.q - q0).abs()).fold(0.0, f64::max);
        v.push(Verdict::at_most(&format!("{label}.charge_conservation"), drift, CHARGE_TOL));
    }
    let residual = observables::first_law_residual(recs, cfg.gibbs.beta)?;
    v.push(Verdict::at_most(
        &format!("{label}.first_law_residual"),
        residual.abs(),
        FIRST_LAW_TOL,
    ));
    if let Some(e0) = traj.state_entropy.first() {
        let drift = traj.state_entropy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max);
        v.push(Verdict::at_most(&format!("{label}.entropy_invariance"), drift, 1e-7));
    }
    if let Some((lo, hi)) = traj.occupation_bounds {
        let excess = (-lo).max(hi - 1.0).max(0.0);
        v.push(Verdict::at_most(&format!("{label}.pauli_bounds"), excess, 1e-9));
    }
    Ok((v, residual))
}

/// Everything a run produces.
#[derive(Clone, Debug)]
pub struct RunResult {
    /// The primary series: exact when it ran, quadratic otherwise.
    pub records: Vec<ProcessRecord>,
    /// The quadratic series of a `both` run.
    pub comparison: Option<Vec<ProcessRecord>>,
    pub final_state: Option<DensityMatrix>,
    pub manifest: RunManifest,
}

fn oracle_verdicts(exact: &Trajectory, quad: &Trajectory) -> Vec<Verdict> {
    let mut field = 0.0f64;
    for (a, b) in exact.records.iter().zip(&quad.records) {
        for (x, y) in [
            (a.u, b.u),
            (a.q, b.q),
            (a.s, b.s),
            (a.sdot, b.sdot),
            (a.rel_s, b.rel_s),
            (a.work, b.work),
            (a.g, b.g),
            (a.d_probe, b.d_probe),
        ] {
            field = field.max((x - y).abs());
        }
    }
    let probe = exact
        .probes
        .iter()
        .zip(&quad.probes)
        .map(|(a, b)| max_deviation(a, b))
        .fold(0.0, f64::max);
    vec![
        Verdict::at_most("oracle.record_fields", field, ORACLE_TOL),
        Verdict::at_most("oracle.one_body_expectations", probe, ORACLE_TOL),
    ]
}

/// Convergence-surrogate verdicts, asserted on the quadratic path of lattices
/// with at least [`CONVERGENCE_MIN_SITES`] sites.
fn convergence(cfg: &RunConfig, traj: &Trajectory, assert: bool, summary: &mut Summary, verdicts: &mut Vec<Verdict>) -> Result<()> {
    let window_end = cfg.window_end();
    match cfg.drive.protocol {
        ProtocolKind::SwitchOn => {
            let tau = cfg.drive.tau_r.expect("validated");
            let Ok(a) = analyze_process_i(&traj.records, cfg.t0(), tau, window_end) else {
                return Ok(());
            };
            summary.process_i_decay_ratio = Some(a.decay_ratio);
            summary.process_i_sdot_ratio = Some(a.sdot_ratio);
            if assert {
                verdicts.push(Verdict::at_most("process_i.decay_ratio", a.decay_ratio, PROCESS_I_DECAY_BOUND));
                verdicts.push(Verdict::at_most("process_i.sdot_late_over_max", a.sdot_ratio, PROCESS_I_SDOT_BOUND));
            }
            summary.process_i = Some(a);
        }
        ProtocolKind::Periodic => {
            let (period, m) = (cfg.drive.period.expect("validated"), cfg.points_per_period().expect("validated"));
            let Ok(a) = analyze_process_ii(&traj.records, &traj.probes, cfg.t0(), period, m, window_end) else {
                return Ok(());
            };
            summary.process_ii_cycle_distance = a.cycle_distance.last().copied();
            if assert {
                verdicts.push(Verdict::at_most("process_ii.cycle_ratio", a.ratio, PROCESS_II_RATIO_BOUND));
                verdicts.push(Verdict::at_most("process_ii.spearman", a.spearman, PROCESS_II_SPEARMAN_BOUND));
                verdicts.push(Verdict::flag("process_ii.phase_consistency", a.phases_consistent));
            }
            summary.process_ii = Some(a);
        }
    }
    Ok(())
}

fn finish(traj: &mut Trajectory, cfg: &RunConfig) -> Result<()> {
    fill_probe_deviation(traj, cfg);
    observables::work_accumulate(&mut traj.records, cfg.gibbs.mu)?;
    Ok(())
}

/// Runs the configured process on the configured path(s).
pub fn run(cfg: &RunConfig) -> Result<RunResult> {
    cfg.validate()?;
    let started = Instant::now();
    let lattice = cfg.lattice()?;
    let protocol = cfg.build_protocol(cfg.path.runs_exact())?;
    let report = certify_drive(&protocol, &lattice, cfg.t_end());
    let mut verdicts = Vec::new();
    let mut summary = Summary::default();

    let exact = if cfg.path.runs_exact() {
        let mut t = exact_trajectory(cfg)?;
        finish(&mut t, cfg)?;
        Some(t)
    } else {
        None
    };
    let quad = if cfg.path.runs_quadratic() {
        let mut t = quadratic_trajectory(cfg)?;
        finish(&mut t, cfg)?;
        Some(t)
    } else {
        None
    };

    let mut steps = (0, 0);
    if let Some(t) = &exact {
        let (v, r) = trajectory_verdicts(t, cfg, "exact", &report)?;
        verdicts.extend(v);
        summary.first_law_residual = Some(r);
        convergence(cfg, t, false, &mut summary, &mut verdicts)?;
    }
    if let Some(t) = &quad {
        let (v, r) = trajectory_verdicts(t, cfg, "quadratic", &report)?;
        verdicts.extend(v);
        summary.first_law_residual.get_or_insert(r);
        convergence(cfg, t, cfg.lattice.sites >= CONVERGENCE_MIN_SITES, &mut summary, &mut verdicts)?;
        steps = (t.steps, t.rejected);
    }
    if let (Some(e), Some(q)) = (&exact, &quad) {
        verdicts.extend(oracle_verdicts(e, q));
    }
    if let Some(c) = report.integrability_constant {
        summary.integrability_constant = Some(c);
    }

    let primary = exact.as_ref().or(quad.as_ref()).expect("a path ran");
    let first = &primary.records[0];
    let last = primary.records.last().expect("nonempty grid");
    summary.final_delta_s = last.s - first.s;
    summary.final_rel_s = last.rel_s;
    summary.final_work = last.work;

    let mut manifest = RunManifest::new(cfg, &report, started.elapsed().as_secs_f64());
    manifest.window = Window {
        start: cfg.t0(),
        end: cfg.window_end(),
        t_end: cfg.t_end(),
        beyond_window: cfg.t_end() > cfg.window_end() + 1e-9,
    };
    manifest.steps = steps;
    manifest.verdicts = verdicts;
    manifest.summary = summary;
    Ok(RunResult {
        records: primary.records.clone(),
        comparison: match (&exact, quad) {
            (Some(_), Some(q)) => Some(q.records),
            _ => None,
        },
        final_state: exact.and_then(|t| t.final_state),
        manifest,
    })
}

/// The path a result's primary series came from.
pub fn primary_path(cfg: &RunConfig) -> PathChoice {
    if cfg.path.runs_exact() {
        PathChoice::Exact
    } else {
        PathChoice::Quadratic
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::Boundary;

    #[test]
    fn spearman_of_monotone_sequences() {
        let x = [0.0, 1.0, 2.0, 3.0];
        assert!((spearman(&x, &[4.0, 3.0, 2.5, 0.1]) + 1.0).abs() < 1e-15);
        assert!((spearman(&x, &[1.0, 2.0, 3.0, 9.0]) - 1.0).abs() < 1e-15);
        assert_eq!(ranks(&[2.0, 1.0, 2.0]), vec![2.5, 1.0, 2.5]);
    }

    #[test]
    fn default_probes_cover_pairs() {
        let lattice = LatticeSpec::new(6, Boundary::Dirichlet, vec![1, 2, 3]).unwrap();
        let p = ProbeSet::default_for(&lattice);
        assert_eq!(p.pairs(), &[(1, 1), (2, 2), (3, 3), (1, 2), (1, 3), (2, 3)]);
        assert!(ProbeSet::from_pairs(&[[0, 1]], &lattice).is_err());
    }

    #[test]
    fn fock_probes_match_correlation_probes() {
        let lattice = LatticeSpec::new(4, Boundary::Dirichlet, vec![1, 2]).unwrap();
        let p = crate::thermo::GibbsParams::new(0.7, 0.2).unwrap();
        let mut h = crate::fock::single_particle_laplacian(&lattice).map(c);
        h[(1, 2)] = C64::new(-1.0, 0.4);
        h[(2, 1)] = C64::new(-1.0, -0.4);
        let gamma = gibbs_correlation(&h, &p).unwrap();
        let rho = gibbs_state(&second_quantize(&lattice, &h).unwrap(), &number_operator(&lattice).unwrap(), &p)
            .unwrap()
            .rho;
        let probes = ProbeSet::default_for(&lattice);
        let exact: Vec<f64> = probes.fock_operators(&lattice).unwrap().iter().map(|a| rho.expect(a)).collect();
        let quad = probes.values_with(|i, j| gamma.matrix()[(i, j)]);
        assert!(max_deviation(&exact, &quad) < 1e-12);
    }

    #[test]
    fn process_i_quarters() {
        let recs: Vec<ProcessRecord> = (0..=100)
            .map(|k| ProcessRecord {
                t: k as f64 * 0.1,
                d_probe: (-(k as f64) * 0.1).exp(),
                sdot: if k < 10 { 1.0 } else { 0.01 },
                ..Default::default()
            })
            .collect();
        let a = analyze_process_i(&recs, 0.0, 1.0, 10.0).unwrap();
        assert!(a.decay_ratio < 0.01);
        assert!((a.sdot_ratio - 0.01).abs() < 1e-12);
        assert!(analyze_process_i(&recs, 0.0, 4.0, 10.0).is_err());
    }
}
