//! Parsing of couplings, initial conditions, presets and fields.

use std::f64::consts::SQRT_2;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use spintri::core_model::{standard_config, GramPoint, Rotation, Vec3};
use spintri::internal_dynamics::{internal_state, reduce};
use spintri::numeric_oracle::{FieldProfile, ZeemanField};
use spintri::special_cases::{aperiodic_solve, IsoscelesParams};
use spintri::{Couplings, Evolution, SpinConfiguration};

use crate::error::{CliError, CliResult};

#[derive(Args, Debug, Clone, Default)]
pub struct InstanceArgs {
    /// Exchange constants; J1 couples spins 2 and 3, J2 spins 3 and 1, J3 spins 1 and 2
    #[arg(long, value_name = "J1,J2,J3", allow_hyphen_values = true)]
    pub couplings: Option<String>,
    /// Initial spins as nine numbers row by row; spin μ is column μ and is normalized
    #[arg(long, value_name = "M11,..,M33", allow_hyphen_values = true)]
    pub matrix: Option<String>,
    /// Initial Gram point (s2·s3, s3·s1, s1·s2), realized with total spin along z
    #[arg(long, value_name = "U,V,W", allow_hyphen_values = true)]
    pub gram: Option<String>,
    /// Sign of det(s1, s2, s3) for a Gram start
    #[arg(long, value_name = "±1", allow_hyphen_values = true)]
    pub orientation: Option<String>,
    /// Rotation applied to a Gram start, as an axis and an angle in radians
    #[arg(long, value_name = "AX,AY,AZ,ANGLE", allow_hyphen_values = true)]
    pub frame: Option<String>,
    /// Named instance: paper-example, aperiodic(LAMBDA) or isosceles(J,J3,A,S)
    #[arg(long, value_name = "NAME")]
    pub preset: Option<String>,
    /// Uniform field magnitude: constant:B, sinusoid:MEAN,AMPLITUDE,PERIOD or table:PATH
    #[arg(long, value_name = "SPEC", allow_hyphen_values = true)]
    pub field: Option<String>,
    /// Field direction
    #[arg(long, value_name = "X,Y,Z", allow_hyphen_values = true)]
    pub field_axis: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub couplings: Couplings,
    pub state: SpinConfiguration,
    pub field: Option<ZeemanField>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Output controls shared by every trajectory-producing subcommand.
#[derive(Args, Debug, Clone)]
pub struct TrajectoryArgs {
    /// Time span: a number, or a multiple of the natural period such as 1T or 2.5T
    #[arg(long, default_value = "1T", allow_hyphen_values = true)]
    pub span: String,
    /// Number of equally spaced samples including both ends
    #[arg(long, default_value_t = 101)]
    pub samples: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write to a file instead of standard output
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

pub fn parse_list(text: &str, what: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|p| {
            let p = p.trim();
            p.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| CliError::Usage(format!("{what}: '{p}' is not a finite number")))
        })
        .collect()
}

pub fn parse_fixed<const N: usize>(text: &str, what: &str) -> CliResult<[f64; N]> {
    let v = parse_list(text, what)?;
    v.try_into()
        .map_err(|v: Vec<f64>| CliError::Usage(format!("{what}: expected {N} numbers, got {}", v.len())))
}

fn parse_couplings(text: &str) -> CliResult<Couplings> {
    Ok(Couplings::from_array(parse_fixed::<3>(text, "--couplings")?))
}

/// A preset name with its optional parenthesized argument list.
fn split_preset(name: &str) -> CliResult<(&str, Vec<f64>)> {
    let name = name.trim();
    match name.find('(') {
        None => Ok((name, Vec::new())),
        Some(open) => {
            let inner = name[open + 1..]
                .strip_suffix(')')
                .ok_or_else(|| CliError::Usage(format!("preset '{name}': missing ')'")))?;
            Ok((&name[..open], parse_list(inner, "--preset")?))
        }
    }
}

/// The worked example: `σ = 0`, `ε = √2/4`, started a quarter period after the turning point.
pub fn paper_example() -> CliResult<(Couplings, SpinConfiguration)> {
    let j = Couplings::paper_example();
    let wd = reduce(&j, SQRT_2 / 4.0, 0.0)?;
    Ok((j, standard_config(&internal_state(0.25 * wd.period(), &wd))?))
}

fn preset(name: &str) -> CliResult<(Couplings, SpinConfiguration)> {
    let (base, args) = split_preset(name)?;
    let arity = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            Err(CliError::Usage(format!(
                "preset {base} takes {n} arguments, got {}",
                args.len()
            )))
        }
    };
    match base {
        "paper-example" => {
            arity(0)?;
            paper_example()
        }
        // Normal form (λ, 1, 0) on the separatrix, at its coplanar midpoint.
        "aperiodic" => {
            arity(1)?;
            let sol = aperiodic_solve(args[0])?;
            Ok((sol.couplings(), sol.state(0.0)?))
        }
        // Couplings (J, J, J3) from the coplanar start with Ŝ·s3 = A and |S| = S.
        "isosceles" => {
            arity(4)?;
            let (jj, j3, a, s_len) = (args[0], args[1], args[2], args[3]);
            if !(a.abs() <= 1.0 && s_len > 0.0 && s_len <= 3.0) {
                return Err(CliError::Domain(format!(
                    "isosceles start needs |A| ≤ 1 and 0 < S ≤ 3, got A = {a}, S = {s_len}"
                )));
            }
            let params = IsoscelesParams::new(a, s_len, jj, j3);
            let s = params.canonical_state(s_len)?;
            let s = SpinConfiguration::new(s.s).map_err(|_| {
                CliError::Domain(format!("no configuration has Ŝ·s3 = {a} and |S| = {s_len}"))
            })?;
            Ok((Couplings::new(jj, jj, j3), s))
        }
        _ => Err(CliError::Usage(format!("unknown preset '{base}'"))),
    }
}

fn parse_field(spec: &str, axis: Option<&str>) -> CliResult<ZeemanField> {
    let axis = match axis {
        Some(a) => Vec3::from(parse_fixed::<3>(a, "--field-axis")?),
        None => Vec3::z(),
    };
    let (kind, rest) = spec
        .split_once(':')
        .ok_or_else(|| CliError::Usage(format!("--field '{spec}': expected KIND:VALUES")))?;
    let profile = match kind {
        "constant" => FieldProfile::Constant(parse_fixed::<1>(rest, "--field constant")?[0]),
        "sinusoid" => {
            let [mean, amplitude, period] = parse_fixed::<3>(rest, "--field sinusoid")?;
            if !(period > 0.0) {
                return Err(CliError::Usage(
                    "--field sinusoid: period must be positive".into(),
                ));
            }
            FieldProfile::Sinusoid {
                mean,
                amplitude,
                period,
            }
        }
        "table" => FieldProfile::Table(read_table(rest)?),
        _ => return Err(CliError::Usage(format!("--field: unknown kind '{kind}'"))),
    };
    Ok(ZeemanField::new(axis, profile)?)
}

/// Two columns `t, B` separated by commas or whitespace; `#` starts a comment
/// and a non-numeric first line is taken as a header.
fn read_table(path: &str) -> CliResult<Vec<(f64, f64)>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("field table {path}: {e}")))?;
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|c| !c.is_empty())
            .collect();
        let parsed: Option<Vec<f64>> = cols.iter().map(|c| c.parse().ok()).collect();
        match parsed {
            Some(v) if v.len() == 2 && v.iter().all(|x: &f64| x.is_finite()) => pts.push((v[0], v[1])),
            None if pts.is_empty() && n == 0 => continue,
            _ => {
                return Err(CliError::Usage(format!(
                    "field table {path}, line {}: expected two numbers",
                    n + 1
                )))
            }
        }
    }
    if pts.is_empty() {
        return Err(CliError::Usage(format!("field table {path} is empty")));
    }
    if pts.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(CliError::Usage(format!(
            "field table {path}: times must increase"
        )));
    }
    Ok(pts)
}

impl InstanceArgs {
    fn has_state(&self) -> bool {
        self.matrix.is_some() || self.gram.is_some() || self.preset.is_some()
    }

    /// Couplings alone, from `--couplings` or a preset.
    pub fn resolve_couplings(&self) -> CliResult<Couplings> {
        match (&self.couplings, &self.preset) {
            (Some(_), Some(_)) => Err(CliError::Usage(
                "--couplings conflicts with --preset, which fixes them".into(),
            )),
            (Some(c), None) => parse_couplings(c),
            (None, Some(p)) => Ok(preset(p)?.0),
            (None, None) => Err(CliError::Usage("give --couplings or --preset".into())),
        }
    }

    /// The start state, when one of the initial-condition forms was given.
    pub fn resolve_state(&self) -> CliResult<Option<SpinConfiguration>> {
        if !self.has_state() {
            return Ok(None);
        }
        self.resolve().map(|i| Some(i.state))
    }

    pub fn resolve(&self) -> CliResult<Instance> {
        let forms = [self.matrix.is_some(), self.gram.is_some(), self.preset.is_some()];
        if forms.iter().filter(|&&f| f).count() != 1 {
            return Err(CliError::Usage(
                "give exactly one of --matrix, --gram, --preset".into(),
            ));
        }
        if self.gram.is_none() && (self.orientation.is_some() || self.frame.is_some()) {
            return Err(CliError::Usage(
                "--orientation and --frame apply to --gram only".into(),
            ));
        }
        if self.field.is_none() && self.field_axis.is_some() {
            return Err(CliError::Usage("--field-axis needs --field".into()));
        }
        let (couplings, state) = if let Some(p) = &self.preset {
            if self.couplings.is_some() {
                return Err(CliError::Usage(
                    "--couplings conflicts with --preset, which fixes them".into(),
                ));
            }
            preset(p)?
        } else {
            let j = parse_couplings(
                self.couplings
                    .as_deref()
                    .ok_or_else(|| CliError::Usage("--couplings is required without --preset".into()))?,
            )?;
            let state = if let Some(m) = &self.matrix {
                let v = parse_fixed::<9>(m, "--matrix")?;
                SpinConfiguration::normalized(spintri::core_model::Mat3::from_row_slice(&v))?
            } else {
                self.gram_state()?
            };
            (j, state)
        };
        let field = self
            .field
            .as_deref()
            .map(|f| parse_field(f, self.field_axis.as_deref()))
            .transpose()?;
        Ok(Instance {
            couplings,
            state,
            field,
        })
    }

    fn gram_state(&self) -> CliResult<SpinConfiguration> {
        let [u, v, w] = parse_fixed::<3>(self.gram.as_deref().unwrap_or_default(), "--gram")?;
        let sign = match self.orientation.as_deref().map(str::trim) {
            None | Some("1") | Some("+1") | Some("+") => 1.0,
            Some("-1") | Some("-") => -1.0,
            Some(o) => return Err(CliError::Usage(format!("--orientation '{o}': expected +1 or -1"))),
        };
        let s = standard_config(&GramPoint::with_orientation(u, v, w, sign))?;
        Ok(match &self.frame {
            None => s,
            Some(f) => {
                let [ax, ay, az, angle] = parse_fixed::<4>(f, "--frame")?;
                let axis = Vec3::new(ax, ay, az);
                if axis.norm() == 0.0 {
                    return Err(CliError::Usage("--frame: axis must be nonzero".into()));
                }
                s.rotated(&Rotation::axis_angle(&axis, angle))
            }
        })
    }
}

/// A span such as `12.5`, `-3`, `1T` or `2.5T`; `period` is asked only for the last form.
pub fn parse_span(text: &str, period: impl FnOnce() -> CliResult<Option<f64>>) -> CliResult<f64> {
    let t = text.trim();
    let value = |s: &str| {
        s.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| CliError::Usage(format!("--span '{text}': expected a number or a multiple of T")))
    };
    match t.strip_suffix('T') {
        Some(k) => {
            let k = if k.is_empty() { 1.0 } else { value(k)? };
            let p = period()?.ok_or_else(|| {
                CliError::Domain("this motion has no natural period; give --span in time units".into())
            })?;
            Ok(k * p)
        }
        None => value(t),
    }
}

/// `n` equally spaced times from 0 to `span`, both ends included.
pub fn sample_times(span: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n)
            .map(|k| {
                if k == n - 1 {
                    span
                } else {
                    span * k as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}
