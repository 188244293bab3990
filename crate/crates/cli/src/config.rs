//! Run configuration: command-line flags layered over an optional
//! `key = value` config file, plus custom problem definitions for
//! piecewise-constant and polynomial coefficient families.
//!
//! File format — one `key = value` per line, `#` starts a comment. Lists are
//! whitespace- or comma-separated. See `docs/config.md` for the key
//! reference and a worked example.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use fbsde::coefficients::{ArgMask, CoefficientSet, GrowthSpec, Problem};
use fbsde::linalg::SquareMat;
use fbsde::pde::{GridSpec, DEFAULT_DELTAS};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CheckKind {
    Girsanov,
    Residual,
    Cauchy,
    Sobolev,
    Malliavin,
}

impl CheckKind {
    pub const ALL: [CheckKind; 5] = [
        CheckKind::Girsanov,
        CheckKind::Residual,
        CheckKind::Cauchy,
        CheckKind::Sobolev,
        CheckKind::Malliavin,
    ];

    pub fn parse(s: &str) -> Result<Vec<CheckKind>, CliError> {
        let mut out = Vec::new();
        for tok in s.split([',', ' ']).filter(|t| !t.is_empty()) {
            match tok {
                "all" => out.extend(Self::ALL),
                "girsanov" => out.push(CheckKind::Girsanov),
                "residual" => out.push(CheckKind::Residual),
                "cauchy" => out.push(CheckKind::Cauchy),
                "sobolev" => out.push(CheckKind::Sobolev),
                "malliavin" => out.push(CheckKind::Malliavin),
                other => {
                    return Err(CliError::Config(format!(
                        "unknown check '{other}'; expected girsanov|residual|cauchy|sobolev|malliavin|all"
                    )))
                }
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }

    pub fn name(&self) -> &'static str {
        match self {
            CheckKind::Girsanov => "girsanov",
            CheckKind::Residual => "residual",
            CheckKind::Cauchy => "cauchy",
            CheckKind::Sobolev => "sobolev",
            CheckKind::Malliavin => "malliavin",
        }
    }
}

/// Where the problem comes from: the built-in catalog or a custom definition
/// carried by the config file.
#[derive(Debug, Clone)]
pub enum ProblemSource {
    Builtin(String),
    Custom(Box<CustomProblem>),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: ProblemSource,
    pub levels: Vec<u32>,
    pub grid: GridSpec,
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
    pub x0: Option<Vec<f64>>,
    pub start: f64,
    pub moll_quad_order: usize,
    pub checks: Vec<CheckKind>,
    pub out_dir: PathBuf,
    pub jobs: usize,
}

impl RunConfig {
    pub fn problem_name(&self) -> &str {
        match &self.problem {
            ProblemSource::Builtin(name) => name,
            ProblemSource::Custom(c) => &c.name,
        }
    }

    pub fn build_problem(&self) -> Result<Problem, CliError> {
        let problem = match &self.problem {
            ProblemSource::Builtin(name) => {
                fbsde::coefficients::builtin_problem(name).map_err(CliError::Problem)?
            }
            ProblemSource::Custom(c) => c.build()?,
        };
        problem.coeffs.admissible().map_err(CliError::Problem)?;
        Ok(problem)
    }

    pub fn resolved_x0(&self, d: usize) -> Vec<f64> {
        self.x0.clone().unwrap_or_else(|| vec![0.0; d])
    }

    /// Canonical string the config hash is computed from.
    pub fn canonical_string(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("problem={}\n", self.problem_name()));
        s.push_str(&format!("levels={:?}\n", self.levels));
        s.push_str(&format!(
            "grid={},{},{},{:?}\n",
            self.grid.half_width, self.grid.nx, self.grid.nt, self.grid.deltas
        ));
        s.push_str(&format!(
            "sim={},{},{},{:?},{}\n",
            self.paths, self.steps, self.seed, self.x0, self.start
        ));
        s.push_str(&format!("quad={}\n", self.moll_quad_order));
        let names: Vec<&str> = self.checks.iter().map(|c| c.name()).collect();
        s.push_str(&format!("checks={names:?}\n"));
        s
    }
}

// ---------------------------------------------------------------------------
// custom problems
// ---------------------------------------------------------------------------

/// Scalar argument a coefficient family reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    X(usize),
    Y(usize),
    Z(usize, usize),
}

impl Var {
    fn parse(s: &str, d: usize, l: usize) -> Result<Var, CliError> {
        let err = || {
            CliError::Config(format!(
                "bad coefficient argument '{s}'; expected t, x1..x{d}, y1..y{l} or z11..z{l}{d}"
            ))
        };
        if s == "t" {
            return Ok(Var::T);
        }
        let (head, rest) = s.split_at(1);
        match head {
            "x" => {
                let i: usize = rest.parse().map_err(|_| err())?;
                if i == 0 || i > d {
                    return Err(err());
                }
                Ok(Var::X(i - 1))
            }
            "y" => {
                let i: usize = rest.parse().map_err(|_| err())?;
                if i == 0 || i > l {
                    return Err(err());
                }
                Ok(Var::Y(i - 1))
            }
            "z" => {
                if rest.len() != 2 {
                    return Err(err());
                }
                let c: usize = rest[0..1].parse().map_err(|_| err())?;
                let k: usize = rest[1..2].parse().map_err(|_| err())?;
                if c == 0 || c > l || k == 0 || k > d {
                    return Err(err());
                }
                Ok(Var::Z(c - 1, k - 1))
            }
            _ => Err(err()),
        }
    }

    fn read(&self, t: f64, x: &[f64], y: &[f64], z: &[f64], d: usize) -> f64 {
        match *self {
            Var::T => t,
            Var::X(i) => x[i],
            Var::Y(i) => y[i],
            Var::Z(c, k) => z[c * d + k],
        }
    }
}

/// Coefficient families expressible in a config file.
#[derive(Debug, Clone)]
pub enum Family {
    Zero,
    Constant(f64),
    /// `Σ coeffs[i] · arg^i`.
    Polynomial {
        arg: Var,
        coeffs: Vec<f64>,
    },
    /// Piecewise constant, right-continuous: value `values[i+1]` on
    /// `[breaks[i], breaks[i+1])`, `values[0]` below the first break.
    Piecewise {
        arg: Var,
        breaks: Vec<f64>,
        values: Vec<f64>,
    },
}

impl Family {
    fn eval(&self, t: f64, x: &[f64], y: &[f64], z: &[f64], d: usize) -> f64 {
        match self {
            Family::Zero => 0.0,
            Family::Constant(c) => *c,
            Family::Polynomial { arg, coeffs } => {
                let v = arg.read(t, x, y, z, d);
                let mut acc = 0.0;
                for &c in coeffs.iter().rev() {
                    acc = acc * v + c;
                }
                acc
            }
            Family::Piecewise {
                arg,
                breaks,
                values,
            } => {
                let v = arg.read(t, x, y, z, d);
                let mut idx = 0;
                for (i, &b) in breaks.iter().enumerate() {
                    if v >= b {
                        idx = i + 1;
                    }
                }
                values[idx]
            }
        }
    }

    fn arg(&self) -> Option<Var> {
        match self {
            Family::Zero | Family::Constant(_) => None,
            Family::Polynomial { arg, .. } => Some(*arg),
            Family::Piecewise { arg, .. } => Some(*arg),
        }
    }

    /// Lipschitz as a function of the continuous arguments (piecewise jumps
    /// and super-linear polynomials are not).
    fn is_lipschitz(&self) -> bool {
        match self {
            Family::Zero | Family::Constant(_) => true,
            Family::Polynomial { coeffs, .. } => coeffs.len() <= 2,
            Family::Piecewise { .. } => false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CustomProblem {
    pub name: String,
    pub d: usize,
    pub l: usize,
    pub horizon: f64,
    pub sigma: Vec<f64>,
    pub lambda: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub flag_b1: bool,
    pub flag_b2: bool,
    pub lipschitz_h: Option<f64>,
    pub b: Vec<Family>,
    pub g: Vec<Family>,
    pub h: Vec<Family>,
}

impl CustomProblem {
    fn mask_of(&self, families: &[Family]) -> ArgMask {
        let mut mask = ArgMask::NONE;
        for f in families {
            match f.arg() {
                Some(Var::T) => mask.t = true,
                Some(Var::X(_)) => mask.x = true,
                Some(Var::Y(_)) => mask.y = true,
                Some(Var::Z(_, _)) => mask.z = true,
                None => {}
            }
        }
        mask
    }

    pub fn build(&self) -> Result<Problem, CliError> {
        let spec = GrowthSpec::new(
            self.d,
            self.l,
            self.horizon,
            SquareMat::new(self.d, self.sigma.clone()),
            self.lambda,
            self.k1,
            self.k2,
            self.k3,
        )
        .map_err(CliError::Problem)?;
        let d = self.d;
        let b_fams = self.b.clone();
        let g_fams = self.g.clone();
        let h_fams = self.h.clone();
        let g_mask = self.mask_of(&self.g);
        let g_lip = self.g.iter().all(Family::is_lipschitz);
        let coeffs = CoefficientSet {
            b: Arc::new(move |t, x, y, z, out: &mut [f64]| {
                for (c, fam) in b_fams.iter().enumerate() {
                    out[c] = fam.eval(t, x, y, z, d);
                }
            }),
            g: Arc::new(move |t, x, y, z, out: &mut [f64]| {
                for (c, fam) in g_fams.iter().enumerate() {
                    out[c] = fam.eval(t, x, y, z, d);
                }
            }),
            h: Arc::new(move |x, out: &mut [f64]| {
                for (c, fam) in h_fams.iter().enumerate() {
                    out[c] = fam.eval(0.0, x, &[], &[], d);
                }
            }),
            b_args: self.mask_of(&self.b),
            g_args: g_mask,
            flag_b1: self.flag_b1,
            flag_b2: self.flag_b2,
            flag_g_no_z: !g_mask.z && g_lip,
            flag_g_no_x: !g_mask.x && g_lip,
            lipschitz_h: self.lipschitz_h,
        };
        Ok(Problem {
            name: self.name.clone(),
            description: "custom problem from config".to_string(),
            coeffs,
            spec,
            oracle: None,
        })
    }
}

// ---------------------------------------------------------------------------
// parsing
// ---------------------------------------------------------------------------

/// Parsed `key = value` file with typed accessors; tracks consumed keys so
/// unknown ones can be rejected.
pub struct KeyValues {
    map: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!(
                    "line {}: expected 'key = value', got '{raw}'",
                    lineno + 1
                )));
            };
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { map })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }

    fn list(&self, key: &str) -> Option<Vec<String>> {
        self.get(key).map(|v| {
            v.split([',', ' '])
                .filter(|t| !t.is_empty())
                .map(|t| t.to_string())
                .collect()
        })
    }

    fn f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        self.get(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| CliError::Config(format!("key '{key}': bad number '{v}'")))
            })
            .transpose()
    }

    fn usize(&self, key: &str) -> Result<Option<usize>, CliError> {
        self.get(key)
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| CliError::Config(format!("key '{key}': bad integer '{v}'")))
            })
            .transpose()
    }

    fn bool(&self, key: &str) -> Result<Option<bool>, CliError> {
        self.get(key)
            .map(|v| {
                v.parse::<bool>()
                    .map_err(|_| CliError::Config(format!("key '{key}': bad boolean '{v}'")))
            })
            .transpose()
    }

    fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        self.list(key)
            .map(|items| {
                items
                    .iter()
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|_| CliError::Config(format!("key '{key}': bad number '{t}'")))
                    })
                    .collect()
            })
            .transpose()
    }

    fn family(&self, prefix: &str, d: usize, l: usize) -> Result<Option<Family>, CliError> {
        let Some(kind) = self.get(&format!("{prefix}.family")) else {
            return Ok(None);
        };
        let fam = match kind {
            "zero" => Family::Zero,
            "constant" => {
                let value = self
                    .f64(&format!("{prefix}.value"))?
                    .ok_or_else(|| CliError::Config(format!("missing key: {prefix}.value")))?;
                Family::Constant(value)
            }
            "polynomial" => {
                let arg = self
                    .get(&format!("{prefix}.arg"))
                    .ok_or_else(|| CliError::Config(format!("missing key: {prefix}.arg")))?;
                let coeffs = self
                    .f64_list(&format!("{prefix}.coeffs"))?
                    .ok_or_else(|| CliError::Config(format!("missing key: {prefix}.coeffs")))?;
                Family::Polynomial {
                    arg: Var::parse(arg, d, l)?,
                    coeffs,
                }
            }
            "piecewise" => {
                let arg = self
                    .get(&format!("{prefix}.arg"))
                    .ok_or_else(|| CliError::Config(format!("missing key: {prefix}.arg")))?;
                let breaks = self
                    .f64_list(&format!("{prefix}.breaks"))?
                    .ok_or_else(|| CliError::Config(format!("missing key: {prefix}.breaks")))?;
                let values = self
                    .f64_list(&format!("{prefix}.values"))?
                    .ok_or_else(|| CliError::Config(format!("missing key: {prefix}.values")))?;
                if values.len() != breaks.len() + 1 {
                    return Err(CliError::Config(format!(
                        "{prefix}: need one more value than breaks (got {} breaks, {} values)",
                        breaks.len(),
                        values.len()
                    )));
                }
                if breaks.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(CliError::Config(format!(
                        "{prefix}.breaks must be strictly increasing"
                    )));
                }
                Family::Piecewise {
                    arg: Var::parse(arg, d, l)?,
                    breaks,
                    values,
                }
            }
            other => {
                return Err(CliError::Config(format!(
                    "{prefix}.family: unknown family '{other}' (zero|constant|polynomial|piecewise)"
                )))
            }
        };
        Ok(Some(fam))
    }

    fn coefficient_block(
        &self,
        letter: &str,
        components: usize,
        d: usize,
        l: usize,
    ) -> Result<Vec<Family>, CliError> {
        let mut out = Vec::with_capacity(components);
        for c in 1..=components {
            let keyed = format!("{letter}{c}");
            let fam = if let Some(f) = self.family(&keyed, d, l)? {
                f
            } else if components == 1 {
                self.family(letter, d, l)?.unwrap_or(Family::Zero)
            } else {
                Family::Zero
            };
            out.push(fam);
        }
        Ok(out)
    }

    pub fn custom_problem(&self) -> Result<CustomProblem, CliError> {
        let need = |key: &str| -> Result<&str, CliError> {
            self.get(key)
                .ok_or_else(|| CliError::Config(format!("missing key: {key}")))
        };
        let d = self
            .usize("d")?
            .ok_or_else(|| CliError::Config("missing key: d".into()))?;
        let l = self
            .usize("l")?
            .ok_or_else(|| CliError::Config("missing key: l".into()))?;
        let horizon = self
            .f64("horizon")?
            .ok_or_else(|| CliError::Config("missing key: horizon".into()))?;
        let sigma = self
            .f64_list("sigma")?
            .ok_or_else(|| CliError::Config("missing key: sigma".into()))?;
        Ok(CustomProblem {
            name: need("name")?.to_string(),
            d,
            l,
            horizon,
            sigma,
            lambda: self
                .f64("lambda")?
                .ok_or_else(|| CliError::Config("missing key: lambda".into()))?,
            k1: self.f64("k1")?.unwrap_or(0.0),
            k2: self.f64("k2")?.unwrap_or(0.0),
            k3: self.f64("k3")?.unwrap_or(0.0),
            flag_b1: self.bool("flag_b1")?.unwrap_or(false),
            flag_b2: self.bool("flag_b2")?.unwrap_or(false),
            lipschitz_h: self.f64("lipschitz_h")?,
            b: self.coefficient_block("b", d, d, l)?,
            g: self.coefficient_block("g", l, d, l)?,
            h: self.coefficient_block("h", l, d, l)?,
        })
    }
}

/// Layers config-file keys and flag overrides into a [`RunConfig`].
pub fn resolve_config(
    file_text: Option<&str>,
    flags: &BTreeMap<String, String>,
) -> Result<RunConfig, CliError> {
    let kv = KeyValues::parse(file_text.unwrap_or(""))?;
    let flag = |name: &str| flags.get(name).map(|s| s.as_str());

    let problem = match flag("problem").or_else(|| kv.get("problem")) {
        Some("custom") => ProblemSource::Custom(Box::new(kv.custom_problem()?)),
        Some(name) => ProblemSource::Builtin(name.to_string()),
        None => return Err(CliError::Config("missing key: problem".into())),
    };

    let parse_levels = |s: &str| -> Result<Vec<u32>, CliError> {
        let levels: Result<Vec<u32>, _> = s
            .split([',', ' '])
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<u32>())
            .collect();
        let levels = levels.map_err(|_| CliError::Config(format!("bad levels list '{s}'")))?;
        if levels.is_empty() || levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Config(
                "levels must be a nonempty strictly increasing list".into(),
            ));
        }
        Ok(levels)
    };
    let levels = match flag("levels").or_else(|| kv.get("levels")) {
        Some(s) => parse_levels(s)?,
        None => vec![4, 8],
    };

    let mut grid = GridSpec::desk_default();
    if let Some(s) = flag("grid") {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 3 {
            return Err(CliError::Config(format!(
                "bad --grid '{s}'; expected L,Nx,Nt"
            )));
        }
        grid.half_width = parts[0]
            .parse()
            .map_err(|_| CliError::Config(format!("bad grid half width '{}'", parts[0])))?;
        grid.nx = parts[1]
            .parse()
            .map_err(|_| CliError::Config(format!("bad grid nx '{}'", parts[1])))?;
        grid.nt = parts[2]
            .parse()
            .map_err(|_| CliError::Config(format!("bad grid nt '{}'", parts[2])))?;
    } else {
        if let Some(v) = kv.f64("grid.half_width")? {
            grid.half_width = v;
        }
        if let Some(v) = kv.usize("grid.nx")? {
            grid.nx = v;
        }
        if let Some(v) = kv.usize("grid.nt")? {
            grid.nt = v;
        }
    }
    let deltas = match flag("deltas") {
        Some(s) => Some(
            s.split(',')
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| CliError::Config(format!("bad delta '{t}'")))
                })
                .collect::<Result<Vec<f64>, _>>()?,
        ),
        None => kv.f64_list("deltas")?,
    };
    grid.deltas = deltas.unwrap_or_else(|| DEFAULT_DELTAS.to_vec());

    let parse_flag_usize = |name: &str, default: usize| -> Result<usize, CliError> {
        match flag(name) {
            Some(s) => s
                .parse()
                .map_err(|_| CliError::Config(format!("bad --{name} '{s}'"))),
            None => Ok(default),
        }
    };
    let paths = parse_flag_usize("paths", kv.usize("paths")?.unwrap_or(2000))?;
    let steps = parse_flag_usize("steps", kv.usize("steps")?.unwrap_or(256))?;
    let jobs = parse_flag_usize("jobs", kv.usize("jobs")?.unwrap_or(1))?.max(1);
    let moll_quad_order = parse_flag_usize(
        "moll-quad-order",
        kv.usize("moll_quad_order")?.unwrap_or(16),
    )?;

    let seed = match flag("seed") {
        Some(s) => s
            .parse()
            .map_err(|_| CliError::Config(format!("bad --seed '{s}'")))?,
        None => kv
            .get("seed")
            .map(|s| {
                s.parse::<u64>()
                    .map_err(|_| CliError::Config(format!("bad seed '{s}'")))
            })
            .transpose()?
            .unwrap_or(42),
    };
    let x0 = match flag("x0") {
        Some(s) => Some(
            s.split(',')
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| CliError::Config(format!("bad x0 entry '{t}'")))
                })
                .collect::<Result<Vec<f64>, _>>()?,
        ),
        None => kv.f64_list("x0")?,
    };
    let start = match flag("start") {
        Some(s) => s
            .parse()
            .map_err(|_| CliError::Config(format!("bad --start '{s}'")))?,
        None => kv.f64("start")?.unwrap_or(0.0),
    };

    let checks = match flag("checks").or_else(|| kv.get("checks")) {
        Some(s) => CheckKind::parse(s)?,
        None => CheckKind::ALL.to_vec(),
    };

    let out_dir = {
        let raw = flag("out")
            .map(|s| s.to_string())
            .or_else(|| kv.get("out").map(|s| s.to_string()))
            .unwrap_or_else(|| "fbsde-out".to_string());
        let path = PathBuf::from(&raw);
        if path.is_absolute() {
            path
        } else {
            match std::env::var_os("FBSDE_OUTPUT_ROOT") {
                Some(root) => PathBuf::from(root).join(path),
                None => path,
            }
        }
    };

    Ok(RunConfig {
        problem,
        levels,
        grid,
        paths,
        steps,
        seed,
        x0,
        start,
        moll_quad_order,
        checks,
        out_dir,
        jobs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn missing_problem_is_a_config_error() {
        let err = resolve_config(None, &BTreeMap::new()).unwrap_err();
        assert!(err.to_string().contains("problem"));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn defaults_are_applied() {
        let cfg = resolve_config(None, &flags(&[("problem", "heat")])).unwrap();
        assert_eq!(cfg.levels, vec![4, 8]);
        assert_eq!(cfg.grid.nx, 401);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.checks.len(), 5);
    }

    #[test]
    fn flags_override_file() {
        let file = "problem = heat\nlevels = 2 4\nseed = 9\n";
        let cfg = resolve_config(
            Some(file),
            &flags(&[("levels", "4,8,16"), ("grid", "3,101,50")]),
        )
        .unwrap();
        assert_eq!(cfg.levels, vec![4, 8, 16]);
        assert_eq!(cfg.grid.half_width, 3.0);
        assert_eq!(cfg.grid.nx, 101);
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn custom_problem_round_trip() {
        let file = r#"
problem = custom
name = step-drift
d = 1
l = 1
horizon = 1.0
sigma = 1.0
lambda = 1.0
k1 = 1.0
k3 = 1.0
flag_b1 = true
b.family = piecewise
b.arg = x1
b.breaks = 0.0
b.values = -0.5 0.5
g.family = zero
h.family = polynomial
h.arg = x1
h.coeffs = 0.0 0.5
"#;
        let cfg = resolve_config(Some(file), &BTreeMap::new()).unwrap();
        let p = cfg.build_problem().unwrap();
        assert_eq!(p.name, "step-drift");
        let mut out = [0.0];
        (p.coeffs.b)(0.0, &[-1.0], &[0.0], &[0.0], &mut out);
        assert_eq!(out[0], -0.5);
        (p.coeffs.b)(0.0, &[0.0], &[0.0], &[0.0], &mut out); // right-continuous at the break
        assert_eq!(out[0], 0.5);
        (p.coeffs.h)(&[2.0], &mut out);
        assert_eq!(out[0], 1.0);
        assert!(p.coeffs.b_args.x && !p.coeffs.b_args.y);
        assert!(p.coeffs.flag_g_no_z && p.coeffs.flag_g_no_x);
    }

    #[test]
    fn piecewise_needs_one_more_value_than_breaks() {
        let file = "problem = custom\nname = bad\nd = 1\nl = 1\nhorizon = 1\nsigma = 1\nlambda = 1\nb.family = piecewise\nb.arg = x1\nb.breaks = 0.0\nb.values = 1.0\n";
        let err = resolve_config(Some(file), &BTreeMap::new()).unwrap_err();
        assert!(err.to_string().contains("one more value"));
    }
}
