//! The subcommands.

use std::path::PathBuf;

use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use spintri::action_angle::{action_angle_data, action_i1_area, action_i1_integral, period_at};
use spintri::core_model::{conserved_values, gram, Vec3};
use spintri::external_dynamics::{alpha_branch_offset, floquet_monodromy, raw_alpha_period, solve};
use spintri::gram_geometry::{
    classify_state, critical_energies, energy_range, separatrix_energies, CaseLabel,
};
use spintri::internal_dynamics::reduce;
use spintri::numeric_oracle::{integrate_dense, IntegratorConfig, ZeemanField};
use spintri::special_cases::{
    aperiodic_solve, face_case_solve, magnetic_frame_transform, solve_special, stationary_states,
    torque_norm, StationaryKind,
};
use spintri::special_functions::{
    complete_elliptic_k, discriminant, half_periods, jacobi_sn_cn_dn, solve_depressed_cubic,
    weierstrass_p_shifted,
};
use spintri::{Couplings, Evolution, SpinConfiguration};

use crate::error::{CliError, CliResult};
use crate::instance::{parse_span, sample_times, Format, Instance, InstanceArgs, TrajectoryArgs};
use crate::output::{csv_row, to_json, write_all, SCHEMA_VERSION, SWEEP_HEADER, TRAJECTORY_HEADER};

type BoxedEvolution = Box<dyn Evolution + Send + Sync>;

/// Closed-form motion of any instance: the elliptic solution when generic, a special form otherwise.
pub fn closed_form(inst: &Instance) -> CliResult<(CaseLabel, BoxedEvolution)> {
    let j = &inst.couplings;
    let label = classify_state(j, &inst.state)?;
    let zero_field: BoxedEvolution = match label {
        CaseLabel::Generic => Box::new(solve(j, &inst.state)?),
        _ => solve_special(j, &inst.state)?,
    };
    Ok(match &inst.field {
        None => (label, zero_field),
        Some(f) => (label, Box::new(magnetic_frame_transform(zero_field, f.clone()))),
    })
}

#[derive(Serialize)]
struct SampleRow {
    t: f64,
    /// `spins[μ]` is spin `μ + 1`.
    spins: [[f64; 3]; 3],
}

#[derive(Serialize)]
struct TrajectoryDoc<'a> {
    schema_version: u32,
    command: &'a str,
    label: &'a str,
    source: &'a str,
    couplings: [f64; 3],
    span: f64,
    samples: Vec<SampleRow>,
}

fn columns(s: &SpinConfiguration) -> [[f64; 3]; 3] {
    let c = |mu: usize| {
        let v = s.spin(mu);
        [v.x, v.y, v.z]
    };
    [c(0), c(1), c(2)]
}

struct Emission<'a> {
    command: &'a str,
    label: &'a str,
    source: &'a str,
    couplings: Couplings,
    span: f64,
}

fn emit_trajectory(
    e: &Emission<'_>,
    out: &TrajectoryArgs,
    rows: &[(f64, SpinConfiguration)],
) -> CliResult<()> {
    let text = match out.format {
        Format::Csv => {
            let mut text = format!("{TRAJECTORY_HEADER}\n");
            for (t, s) in rows {
                let flat: Vec<f64> = std::iter::once(*t)
                    .chain(columns(s).into_iter().flatten())
                    .collect();
                text.push_str(&csv_row(&flat));
                text.push('\n');
            }
            text
        }
        Format::Json => to_json(&TrajectoryDoc {
            schema_version: SCHEMA_VERSION,
            command: e.command,
            label: e.label,
            source: e.source,
            couplings: e.couplings.as_array(),
            span: e.span,
            samples: rows
                .iter()
                .map(|(t, s)| SampleRow {
                    t: *t,
                    spins: columns(s),
                })
                .collect(),
        }),
    };
    write_all(out.output.as_deref(), &text)
}

fn evaluate(evo: &dyn Evolution, times: &[f64]) -> CliResult<Vec<(f64, SpinConfiguration)>> {
    times.iter().map(|&t| Ok((t, evo.state(t)?))).collect()
}

#[derive(Args, Debug, Clone)]
pub struct OracleArgs {
    /// Relative tolerance of the Runge–Kutta reference
    #[arg(long, default_value_t = 1e-10)]
    pub rel_tol: f64,
    /// Absolute tolerance; defaults to 1e-2 of the relative one
    #[arg(long)]
    pub abs_tol: Option<f64>,
    /// Project the spins back onto the unit sphere after every step
    #[arg(long)]
    pub renormalize: bool,
}

impl OracleArgs {
    fn config(&self) -> CliResult<IntegratorConfig> {
        let mut cfg = IntegratorConfig::with_tol(self.rel_tol);
        if let Some(a) = self.abs_tol {
            cfg.abs_tol = a;
        }
        if !(cfg.rel_tol > 0.0 && cfg.abs_tol > 0.0) {
            return Err(CliError::Usage("tolerances must be positive".into()));
        }
        cfg.renormalize = self.renormalize;
        Ok(cfg)
    }
}

fn oracle_states(
    inst: &Instance,
    cfg: &IntegratorConfig,
    span: f64,
    times: &[f64],
) -> CliResult<Vec<(f64, SpinConfiguration)>> {
    if times.is_empty() || span == 0.0 {
        return Ok(times.iter().map(|&t| (t, inst.state)).collect());
    }
    let dense = integrate_dense(&inst.couplings, &inst.state, span, cfg, inst.field.as_ref())?;
    Ok(times
        .iter()
        .map(|&t| (t, if t == 0.0 { inst.state } else { dense.eval(t) }))
        .collect())
}

#[derive(Args, Debug, Clone)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Serialize)]
struct GramDoc {
    u: f64,
    v: f64,
    w: f64,
    delta: f64,
}

#[derive(Serialize)]
struct ConservedDoc {
    epsilon: f64,
    sigma: f64,
    sigma3: f64,
    s_len: f64,
}

#[derive(Serialize)]
struct ClassifyDoc {
    schema_version: u32,
    command: &'static str,
    label: &'static str,
    equal_pair: Option<[usize; 2]>,
    couplings: [f64; 3],
    gram: GramDoc,
    conserved: ConservedDoc,
    e_min: Option<f64>,
    e_max: Option<f64>,
    critical_energies: Vec<f64>,
    separatrix_energies: [f64; 3],
    period: Option<f64>,
}

pub fn classify(a: &ClassifyArgs) -> CliResult<()> {
    let inst = a.instance.resolve()?;
    let j = &inst.couplings;
    let label = classify_state(j, &inst.state)?;
    let cv = conserved_values(&inst.state, j);
    let g = gram(&inst.state);
    let range = energy_range(j, cv.sigma).ok();
    let doc = ClassifyDoc {
        schema_version: SCHEMA_VERSION,
        command: "classify",
        label: label.name(),
        equal_pair: match label {
            CaseLabel::Isosceles { equal_pair } => Some([equal_pair.0, equal_pair.1]),
            _ => None,
        },
        couplings: j.as_array(),
        gram: GramDoc {
            u: g.u,
            v: g.v,
            w: g.w,
            delta: g.delta,
        },
        conserved: ConservedDoc {
            epsilon: cv.epsilon,
            sigma: cv.sigma,
            sigma3: cv.sigma3,
            s_len: cv.s_len,
        },
        e_min: range.map(|r| r.e_min),
        e_max: range.map(|r| r.e_max),
        critical_energies: critical_energies(j, cv.sigma).into_iter().map(|c| c.0).collect(),
        separatrix_energies: separatrix_energies(j),
        period: match label {
            CaseLabel::Generic => reduce(j, cv.epsilon, cv.sigma).ok().map(|wd| wd.period()),
            _ => None,
        },
    };
    write_all(a.output.as_deref(), &to_json(&doc))
}

#[derive(Args, Debug, Clone)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub out: TrajectoryArgs,
}

pub fn simulate(a: &SimulateArgs) -> CliResult<()> {
    let inst = a.instance.resolve()?;
    let (label, evo) = closed_form(&inst)?;
    trajectory_from(&evo, "simulate", label.name(), "closed-form", &a.out)
}

fn trajectory_from(
    evo: &dyn Evolution,
    command: &str,
    label: &str,
    source: &str,
    out: &TrajectoryArgs,
) -> CliResult<()> {
    let span = parse_span(&out.span, || Ok(evo.period()))?;
    let rows = evaluate(evo, &sample_times(span, out.samples))?;
    let e = Emission {
        command,
        label,
        source,
        couplings: evo.couplings(),
        span,
    };
    emit_trajectory(&e, out, &rows)
}

#[derive(Args, Debug, Clone)]
pub struct IntegrateArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub out: TrajectoryArgs,
    #[command(flatten)]
    pub oracle: OracleArgs,
}

pub fn integrate(a: &IntegrateArgs) -> CliResult<()> {
    let inst = a.instance.resolve()?;
    let cfg = a.oracle.config()?;
    let label = classify_state(&inst.couplings, &inst.state)?;
    // The natural period comes from the closed form, so only `…T` spans need it.
    let span = parse_span(&a.out.span, || Ok(closed_form(&inst)?.1.period()))?;
    let rows = oracle_states(&inst, &cfg, span, &sample_times(span, a.out.samples))?;
    let e = Emission {
        command: "integrate",
        label: label.name(),
        source: "runge-kutta",
        couplings: inst.couplings,
        span,
    };
    emit_trajectory(&e, &a.out, &rows)
}

#[derive(Args, Debug, Clone)]
pub struct SpecialArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub out: TrajectoryArgs,
    /// List the stationary states of the couplings; always JSON
    #[arg(long, conflicts_with = "face_gamma")]
    pub stationary_states: bool,
    /// Face-case start s1 = −s2 with s1·s3 = GAMMA; needs J1 = J2
    #[arg(long, value_name = "GAMMA", allow_hyphen_values = true)]
    pub face_gamma: Option<f64>,
}

#[derive(Serialize)]
struct StationaryDoc {
    kind: &'static str,
    singular_index: Option<usize>,
    energy: f64,
    torque: f64,
    spins: [[f64; 3]; 3],
}

#[derive(Serialize)]
struct StationaryListDoc {
    schema_version: u32,
    command: &'static str,
    couplings: [f64; 3],
    states: Vec<StationaryDoc>,
}

pub fn special(a: &SpecialArgs) -> CliResult<()> {
    if a.stationary_states || a.face_gamma.is_some() {
        if a.instance.matrix.is_some() || a.instance.gram.is_some() || a.instance.field.is_some() {
            return Err(CliError::Usage(
                "--stationary-states and --face-gamma take couplings only".into(),
            ));
        }
        let j = a.instance.resolve_couplings()?;
        if let Some(gamma) = a.face_gamma {
            let evo = face_case_solve(&j, gamma)?;
            return trajectory_from(&evo, "special", CaseLabel::FaceCase.name(), "closed-form", &a.out);
        }
        let states = stationary_states(&j)
            .into_iter()
            .map(|st| {
                let (kind, singular_index) = match st.kind {
                    StationaryKind::CoplanarCritical => ("CoplanarCritical", None),
                    StationaryKind::Collinear(n) => ("Collinear", Some(n)),
                    StationaryKind::TwoSpin => ("TwoSpin", None),
                };
                StationaryDoc {
                    kind,
                    singular_index,
                    energy: st.energy,
                    torque: torque_norm(&st.config, &j),
                    spins: columns(&st.config),
                }
            })
            .collect();
        let doc = StationaryListDoc {
            schema_version: SCHEMA_VERSION,
            command: "special",
            couplings: j.as_array(),
            states,
        };
        return write_all(a.out.output.as_deref(), &to_json(&doc));
    }
    let inst = a.instance.resolve()?;
    let (label, evo) = closed_form(&inst)?;
    if label == CaseLabel::Generic {
        return Err(CliError::Domain("instance is generic; use simulate".into()));
    }
    trajectory_from(&evo, "special", label.name(), "closed-form", &a.out)
}

#[derive(Args, Debug, Clone)]
pub struct CompareArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub oracle: OracleArgs,
    /// Time span: a number, or a multiple of the natural period such as 1T
    #[arg(long, default_value = "1T", allow_hyphen_values = true)]
    pub span: String,
    #[arg(long, default_value_t = 201)]
    pub samples: usize,
    /// Largest admissible componentwise deviation
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Serialize)]
struct CompareDoc {
    schema_version: u32,
    command: &'static str,
    label: &'static str,
    couplings: [f64; 3],
    span: f64,
    samples: usize,
    rel_tol: f64,
    tol: f64,
    max_deviation: f64,
    worst_time: f64,
    pass: bool,
}

/// Largest componentwise deviation between the closed form and the reference, and where it occurs.
pub fn deviation(
    inst: &Instance,
    evo: &dyn Evolution,
    cfg: &IntegratorConfig,
    span: f64,
    samples: usize,
) -> CliResult<(f64, f64)> {
    let times = sample_times(span, samples);
    let reference = oracle_states(inst, cfg, span, &times)?;
    let mut worst = (0.0, 0.0);
    for (t, s) in reference {
        let d = evo.state(t)?.max_abs_diff(&s);
        // NaN counts as the worst deviation.
        if !(d <= worst.0) {
            worst = (d, t);
        }
    }
    Ok(worst)
}

pub fn compare(a: &CompareArgs) -> CliResult<()> {
    if !(a.tol >= 0.0) {
        return Err(CliError::Usage("--tol must be non-negative".into()));
    }
    let inst = a.instance.resolve()?;
    let cfg = a.oracle.config()?;
    let (label, evo) = closed_form(&inst)?;
    let span = parse_span(&a.span, || Ok(evo.period()))?;
    let (max_deviation, worst_time) = deviation(&inst, &evo, &cfg, span, a.samples)?;
    let pass = max_deviation <= a.tol;
    let doc = CompareDoc {
        schema_version: SCHEMA_VERSION,
        command: "compare",
        label: label.name(),
        couplings: inst.couplings.as_array(),
        span,
        samples: a.samples,
        rel_tol: cfg.rel_tol,
        tol: a.tol,
        max_deviation,
        worst_time,
        pass,
    };
    write_all(a.output.as_deref(), &to_json(&doc))?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Comparison(format!(
            "max deviation {max_deviation:e} exceeds {:e}",
            a.tol
        )))
    }
}

#[derive(Args, Debug, Clone)]
pub struct ActionsArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Also compute I1 from the area swept by the basic cycle
    #[arg(long)]
    pub area: bool,
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Serialize)]
struct ActionsDoc {
    schema_version: u32,
    command: &'static str,
    couplings: [f64; 3],
    epsilon: f64,
    sigma: f64,
    period: f64,
    alpha_period_raw: f64,
    alpha_period_smoothed: f64,
    floquet_f: f64,
    i1: f64,
    i1_area: Option<f64>,
    i2: f64,
    i3: f64,
    omega_1: f64,
    omega_2: f64,
    omega_3: f64,
}

pub fn actions(a: &ActionsArgs) -> CliResult<()> {
    let inst = a.instance.resolve()?;
    let j = &inst.couplings;
    let label = classify_state(j, &inst.state)?;
    if label != CaseLabel::Generic {
        return Err(CliError::Domain(format!(
            "action-angle data need a generic instance, got {}",
            label.name()
        )));
    }
    let mean = match &inst.field {
        None => None,
        Some(f) => Some(
            f.profile
                .mean()
                .ok_or_else(|| CliError::Domain("a tabulated field has no mean frequency".into()))?,
        ),
    };
    let sol = solve(j, &inst.state)?;
    let data = action_angle_data(&sol, mean)?;
    let (sigma, epsilon) = (sol.wd.sigma, sol.wd.epsilon);
    let doc = ActionsDoc {
        schema_version: SCHEMA_VERSION,
        command: "actions",
        couplings: j.as_array(),
        epsilon,
        sigma,
        period: sol.period(),
        alpha_period_raw: sol.alpha_period,
        alpha_period_smoothed: sol.smoothed_alpha_period()?,
        floquet_f: floquet_monodromy(&sol).f,
        i1: data.i1,
        i1_area: if a.area {
            Some(action_i1_area(j, sigma, epsilon)?)
        } else {
            None
        },
        i2: data.i2,
        i3: data.i3,
        omega_1: data.omega_1,
        omega_2: data.omega_2,
        omega_3: data.omega_3,
    };
    write_all(a.output.as_deref(), &to_json(&doc))
}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Slice `u + v + w`; defaults to that of the start state, or 0
    #[arg(long, allow_hyphen_values = true)]
    pub sigma: Option<f64>,
    /// Number of energies
    #[arg(long, default_value_t = 20)]
    pub points: usize,
    /// Lowest energy; with --eps-max the grid includes both ends
    #[arg(long, allow_hyphen_values = true, requires = "eps_max")]
    pub eps_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true, requires = "eps_min")]
    pub eps_max: Option<f64>,
    /// Skip the action I1, the slowest column
    #[arg(long)]
    pub no_actions: bool,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Serialize, Clone, Copy)]
struct SweepRow {
    index: usize,
    epsilon: f64,
    period: f64,
    alpha_raw: f64,
    alpha_smoothed: f64,
    i1: Option<f64>,
}

#[derive(Serialize)]
struct SweepDoc {
    schema_version: u32,
    command: &'static str,
    couplings: [f64; 3],
    sigma: f64,
    rows: Vec<SweepRow>,
}

/// Worker count from `SPINTRI_THREADS`, or rayon's default when unset.
pub fn thread_cap() -> CliResult<Option<usize>> {
    match std::env::var("SPINTRI_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!(
                "SPINTRI_THREADS='{v}': expected a positive integer"
            ))),
        },
    }
}

fn sweep_row(
    j: &Couplings,
    sigma: f64,
    index: usize,
    epsilon: f64,
    with_actions: bool,
) -> CliResult<SweepRow> {
    let at = |e: spintri::Error| CliError::Domain(format!("sweep row {index} (ε = {epsilon}): {e}"));
    let alpha_raw = raw_alpha_period(j, epsilon, sigma).map_err(at)?;
    Ok(SweepRow {
        index,
        epsilon,
        period: period_at(j, sigma, epsilon).map_err(at)?,
        alpha_raw,
        alpha_smoothed: alpha_raw - alpha_branch_offset(j, sigma, epsilon).map_err(at)?,
        i1: if with_actions {
            Some(action_i1_integral(j, sigma, epsilon).map_err(at)?)
        } else {
            None
        },
    })
}

pub fn sweep(a: &SweepArgs) -> CliResult<()> {
    if a.instance.field.is_some() {
        return Err(CliError::Usage("sweep takes no field".into()));
    }
    let j = a.instance.resolve_couplings()?;
    let sigma = match (a.sigma, a.instance.resolve_state()?) {
        (Some(s), _) => s,
        (None, Some(s)) => conserved_values(&s, &j).sigma,
        (None, None) => 0.0,
    };
    let n = a.points;
    let grid: Vec<f64> = match (a.eps_min, a.eps_max) {
        (Some(lo), Some(hi)) => (0..n)
            .map(|k| {
                if n == 1 {
                    lo
                } else {
                    lo + (hi - lo) * k as f64 / (n - 1) as f64
                }
            })
            .collect(),
        // Cell midpoints keep clear of the degenerate ends of the range.
        _ => {
            let r = energy_range(&j, sigma)?;
            (0..n)
                .map(|k| r.e_min + (r.e_max - r.e_min) * (k as f64 + 0.5) / n as f64)
                .collect()
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = thread_cap()? {
        pool = pool.num_threads(t);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Domain(format!("thread pool: {e}")))?;
    // `collect` keeps input order whatever the completion order.
    let rows: Vec<SweepRow> = pool.install(|| {
        grid.par_iter()
            .enumerate()
            .map(|(i, &e)| sweep_row(&j, sigma, i, e, !a.no_actions))
            .collect::<CliResult<Vec<_>>>()
    })?;
    let text = match a.format {
        Format::Csv => {
            let mut text = format!("{SWEEP_HEADER}\n");
            for r in &rows {
                let i1 = r.i1.map_or_else(|| "nan".to_string(), crate::output::fmt_f64);
                let nums = csv_row(&[r.epsilon, r.period, r.alpha_raw, r.alpha_smoothed]);
                text.push_str(&format!("{},{nums},{i1}\n", r.index));
            }
            text
        }
        Format::Json => to_json(&SweepDoc {
            schema_version: SCHEMA_VERSION,
            command: "sweep",
            couplings: j.as_array(),
            sigma,
            rows,
        }),
    };
    write_all(a.output.as_deref(), &text)
}

#[derive(Args, Debug, Clone)]
pub struct EllipticArgs {
    /// Parameter m of K(m) and of the Jacobi functions
    #[arg(long, allow_hyphen_values = true)]
    pub m: Option<f64>,
    /// Argument of sn, cn, dn
    #[arg(long, allow_hyphen_values = true, requires = "m")]
    pub u: Option<f64>,
    /// Invariant g2 of 4x³ − g2·x − g3
    #[arg(long, allow_hyphen_values = true, requires = "g3")]
    pub g2: Option<f64>,
    #[arg(long, allow_hyphen_values = true, requires = "g2")]
    pub g3: Option<f64>,
    /// Argument of ℘(t + ω3) and its derivative
    #[arg(long, allow_hyphen_values = true, requires = "g2")]
    pub t: Option<f64>,
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Serialize, Default)]
struct EllipticDoc {
    schema_version: u32,
    command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    jacobi: Option<JacobiDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weierstrass: Option<WeierstrassDoc>,
}

#[derive(Serialize)]
struct JacobiDoc {
    m: f64,
    k: f64,
    u: Option<f64>,
    sn: Option<f64>,
    cn: Option<f64>,
    dn: Option<f64>,
}

#[derive(Serialize)]
struct WeierstrassDoc {
    g2: f64,
    g3: f64,
    discriminant: f64,
    roots: [f64; 3],
    omega1: f64,
    omega3_im: f64,
    period: f64,
    t: Option<f64>,
    p: Option<f64>,
    p_prime: Option<f64>,
}

pub fn elliptic(a: &EllipticArgs) -> CliResult<()> {
    if a.m.is_none() && a.g2.is_none() {
        return Err(CliError::Usage("give --m and/or --g2 with --g3".into()));
    }
    let mut doc = EllipticDoc {
        schema_version: SCHEMA_VERSION,
        command: "elliptic",
        ..Default::default()
    };
    if let Some(m) = a.m {
        let k = complete_elliptic_k(m)?;
        let jac = a.u.map(|u| jacobi_sn_cn_dn(u, m)).transpose()?;
        doc.jacobi = Some(JacobiDoc {
            m,
            k,
            u: a.u,
            sn: jac.map(|x| x.0),
            cn: jac.map(|x| x.1),
            dn: jac.map(|x| x.2),
        });
    }
    if let (Some(g2), Some(g3)) = (a.g2, a.g3) {
        let roots = solve_depressed_cubic(g2, g3)?;
        let hp = half_periods(&roots)?;
        let p = a.t.map(|t| weierstrass_p_shifted(t, &roots)).transpose()?;
        doc.weierstrass = Some(WeierstrassDoc {
            g2,
            g3,
            discriminant: discriminant(g2, g3),
            roots: roots.as_array(),
            omega1: hp.omega1,
            omega3_im: hp.omega3_im,
            period: hp.period(),
            t: a.t,
            p: p.map(|x| x.0),
            p_prime: p.map(|x| x.1),
        });
    }
    write_all(a.output.as_deref(), &to_json(&doc))
}

#[derive(Args, Debug, Clone)]
pub struct SelftestArgs {
    /// Seed of the random instances
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random instances per family
    #[arg(long, default_value_t = 3)]
    pub instances: usize,
    /// Largest admissible deviation from the reference
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Serialize)]
struct CheckDoc {
    name: String,
    label: &'static str,
    couplings: [f64; 3],
    max_deviation: f64,
    pass: bool,
    error: Option<String>,
}

#[derive(Serialize)]
struct SelftestDoc {
    schema_version: u32,
    command: &'static str,
    seed: u64,
    tol: f64,
    checks: Vec<CheckDoc>,
    pass: bool,
}

fn random_unit(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

fn random_state(rng: &mut impl Rng) -> SpinConfiguration {
    SpinConfiguration::from_columns(random_unit(rng), random_unit(rng), random_unit(rng))
        .expect("unit columns")
}

/// The closed form against the reference over `span` (or one natural period).
fn check_instance(name: String, inst: &Instance, span: Option<f64>, tol: f64) -> CheckDoc {
    let cfg = IntegratorConfig::with_tol(1e-11);
    let couplings = inst.couplings.as_array();
    let run = || -> CliResult<(&'static str, f64)> {
        let (label, evo) = closed_form(inst)?;
        let span = span.or(evo.period()).unwrap_or(10.0);
        Ok((label.name(), deviation(inst, &evo, &cfg, span, 64)?.0))
    };
    match run() {
        Ok((label, d)) => CheckDoc {
            name,
            label,
            couplings,
            max_deviation: d,
            pass: d <= tol,
            error: None,
        },
        Err(e) => CheckDoc {
            name,
            label: "",
            couplings,
            max_deviation: f64::NAN,
            pass: false,
            error: Some(e.to_string()),
        },
    }
}

pub fn selftest(a: &SelftestArgs) -> CliResult<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut checks = Vec::new();
    for k in 0..a.instances {
        // Resample until generic; random draws almost never are not.
        let inst = loop {
            let j = Couplings::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let state = random_state(&mut rng);
            if classify_state(&j, &state) == Ok(CaseLabel::Generic) {
                break Instance {
                    couplings: j,
                    state,
                    field: None,
                };
            }
        };
        checks.push(check_instance(format!("generic-{k}"), &inst, None, a.tol));
    }
    for k in 0..a.instances {
        let (jj, j3) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let inst = Instance {
            couplings: Couplings::new(jj, jj, j3),
            state: random_state(&mut rng),
            field: None,
        };
        checks.push(check_instance(format!("isosceles-{k}"), &inst, Some(5.0), a.tol));
    }
    for k in 0..a.instances {
        let lambda = rng.gen_range(0.1..0.9);
        let sol = aperiodic_solve(lambda)?;
        let inst = Instance {
            couplings: sol.couplings(),
            state: sol.state(0.0)?,
            field: None,
        };
        checks.push(check_instance(format!("aperiodic-{k}"), &inst, Some(5.0), a.tol));
    }
    for k in 0..a.instances {
        let inst = Instance {
            couplings: Couplings::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ),
            state: random_state(&mut rng),
            field: Some(ZeemanField::new(
                random_unit(&mut rng),
                spintri::numeric_oracle::FieldProfile::Sinusoid {
                    mean: rng.gen_range(-1.0..1.0),
                    amplitude: rng.gen_range(0.0..1.0),
                    period: rng.gen_range(1.0..4.0),
                },
            )?),
        };
        checks.push(check_instance(format!("field-{k}"), &inst, None, a.tol));
    }
    for k in 0..a.instances {
        let j = Couplings::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let torque = stationary_states(&j)
            .iter()
            .map(|s| torque_norm(&s.config, &j))
            .fold(0.0, f64::max);
        checks.push(CheckDoc {
            name: format!("stationary-{k}"),
            label: "",
            couplings: j.as_array(),
            max_deviation: torque,
            pass: torque <= 1e-12,
            error: None,
        });
    }
    let pass = checks.iter().all(|c| c.pass);
    let doc = SelftestDoc {
        schema_version: SCHEMA_VERSION,
        command: "selftest",
        seed: a.seed,
        tol: a.tol,
        checks,
        pass,
    };
    write_all(a.output.as_deref(), &to_json(&doc))?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Comparison("at least one self-test check failed".into()))
    }
}
