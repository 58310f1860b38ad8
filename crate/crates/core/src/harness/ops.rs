//! The operation registry: every library operation reachable from the
//! command line and from experiment files, with its parameter schema.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::kernel::{self, Correction, ErrorEnvelope, McConfig, Weight};
use crate::model::{self, DerivedConstants, ModelParams, RateFamily, RateTable};
use crate::numeric;
use crate::pde::{self, PdeOptions, Schedule, Side};
use crate::sim::{self, Functional, SimConfig};
use crate::spectral::{self, EigenSystem};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Float,
    Int,
    Bool,
    Text,
    /// Comma-separated reals, or a TOML array.
    List,
}

/// Admissible range of a numeric parameter (applied to every list entry).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bound {
    Any,
    Positive,
    NonNegative,
    /// Strictly greater than the value.
    Above(f64),
    AtLeast(f64),
    /// Inside (0, 1).
    OpenUnit,
}

impl Bound {
    fn admits(self, v: f64) -> bool {
        match self {
            Bound::Any => !v.is_nan(),
            Bound::Positive => v > 0.0,
            Bound::NonNegative => v >= 0.0,
            Bound::Above(a) => v > a,
            Bound::AtLeast(a) => v >= a,
            Bound::OpenUnit => v > 0.0 && v < 1.0,
        }
    }

    fn describe(self) -> String {
        match self {
            Bound::Any => "a number".into(),
            Bound::Positive => "positive".into(),
            Bound::NonNegative => "nonnegative".into(),
            Bound::Above(a) => format!("greater than {a}"),
            Bound::AtLeast(a) => format!("at least {a}"),
            Bound::OpenUnit => "inside (0, 1)".into(),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ParamSpec {
    pub name: &'static str,
    pub kind: Kind,
    /// Default in command-line syntax.
    pub default: &'static str,
    pub bound: Bound,
    pub help: &'static str,
}

const fn param(
    name: &'static str,
    kind: Kind,
    default: &'static str,
    bound: Bound,
    help: &'static str,
) -> ParamSpec {
    ParamSpec {
        name,
        kind,
        default,
        bound,
        help,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    List(Vec<f64>),
    Text(String),
}

impl std::fmt::Display for ParamValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParamValue::Bool(b) => write!(f, "{b}"),
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(x) => write!(f, "{x}"),
            ParamValue::List(v) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "{}", parts.join(","))
            }
            ParamValue::Text(s) => write!(f, "{s}"),
        }
    }
}

fn parse_list(text: &str) -> Option<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().ok())
        .collect()
}

impl ParamSpec {
    /// Parse command-line text.
    pub fn parse(&self, text: &str) -> Result<ParamValue> {
        let bad = || {
            Error::config(format!(
                "parameter {}: cannot read {text:?} as {:?}",
                self.name, self.kind
            ))
        };
        let v = match self.kind {
            Kind::Float => ParamValue::Float(text.trim().parse().map_err(|_| bad())?),
            Kind::Int => ParamValue::Int(text.trim().parse().map_err(|_| bad())?),
            Kind::Bool => ParamValue::Bool(text.trim().parse().map_err(|_| bad())?),
            Kind::Text => ParamValue::Text(text.to_string()),
            Kind::List => ParamValue::List(parse_list(text).ok_or_else(bad)?),
        };
        self.check(&v)?;
        Ok(v)
    }

    /// Convert a value read from an experiment file.
    pub fn from_toml(&self, value: &toml::Value) -> Result<ParamValue> {
        let mismatch = || {
            Error::config(format!(
                "parameter {}: expected {:?}, got {value}",
                self.name, self.kind
            ))
        };
        let number = |v: &toml::Value| match v {
            toml::Value::Float(f) => Some(*f),
            toml::Value::Integer(i) => Some(*i as f64),
            _ => None,
        };
        let v = match (self.kind, value) {
            (Kind::Float, v) => ParamValue::Float(number(v).ok_or_else(mismatch)?),
            (Kind::Int, toml::Value::Integer(i)) => ParamValue::Int(*i),
            (Kind::Bool, toml::Value::Boolean(b)) => ParamValue::Bool(*b),
            (Kind::Text, toml::Value::String(s)) => ParamValue::Text(s.clone()),
            (Kind::List, toml::Value::Array(items)) => ParamValue::List(
                items
                    .iter()
                    .map(number)
                    .collect::<Option<_>>()
                    .ok_or_else(mismatch)?,
            ),
            (Kind::List, toml::Value::String(s)) => {
                ParamValue::List(parse_list(s).ok_or_else(mismatch)?)
            }
            (Kind::List, v) => ParamValue::List(vec![number(v).ok_or_else(mismatch)?]),
            _ => return Err(mismatch()),
        };
        self.check(&v)?;
        Ok(v)
    }

    fn check(&self, v: &ParamValue) -> Result<()> {
        let values: Vec<f64> = match v {
            ParamValue::Float(x) => {
                if !x.is_finite() {
                    return Err(Error::config(format!(
                        "parameter {} must be finite, got {x}",
                        self.name
                    )));
                }
                vec![*x]
            }
            ParamValue::Int(i) => vec![*i as f64],
            ParamValue::List(xs) => xs.clone(),
            _ => return Ok(()),
        };
        match values.iter().find(|x| !self.bound.admits(**x)) {
            Some(x) => Err(Error::config(format!(
                "parameter {} must be {}, got {x}",
                self.name,
                self.bound.describe()
            ))),
            None => Ok(()),
        }
    }
}

/// Fully resolved parameters of one run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Params(pub BTreeMap<String, ParamValue>);

impl Params {
    fn get(&self, name: &str) -> &ParamValue {
        self.0
            .get(name)
            .unwrap_or_else(|| panic!("parameter {name} missing after resolution"))
    }

    pub fn f(&self, name: &str) -> f64 {
        match self.get(name) {
            ParamValue::Float(x) => *x,
            ParamValue::Int(i) => *i as f64,
            v => panic!("parameter {name} is not a number: {v:?}"),
        }
    }

    pub fn n(&self, name: &str) -> usize {
        match self.get(name) {
            ParamValue::Int(i) => usize::try_from(*i).unwrap_or(0),
            v => panic!("parameter {name} is not an integer: {v:?}"),
        }
    }

    pub fn b(&self, name: &str) -> bool {
        match self.get(name) {
            ParamValue::Bool(b) => *b,
            v => panic!("parameter {name} is not a flag: {v:?}"),
        }
    }

    pub fn s(&self, name: &str) -> &str {
        match self.get(name) {
            ParamValue::Text(s) => s,
            v => panic!("parameter {name} is not text: {v:?}"),
        }
    }

    pub fn list(&self, name: &str) -> &[f64] {
        match self.get(name) {
            ParamValue::List(v) => v,
            v => panic!("parameter {name} is not a list: {v:?}"),
        }
    }
}

/// Seed and execution mode handed to an operation.
#[derive(Clone, Copy, Debug)]
pub struct Context {
    pub seed: u64,
    pub exec: Execution,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub tolerance: String,
    pub passed: bool,
}

impl CheckResult {
    pub fn new(
        name: impl Into<String>,
        value: f64,
        tolerance: impl Into<String>,
        passed: bool,
    ) -> Self {
        CheckResult {
            name: name.into(),
            value,
            tolerance: tolerance.into(),
            passed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// Files, summary and checks produced by one run of an operation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CellOutput {
    pub files: Vec<OutputFile>,
    pub summary: serde_json::Value,
    pub checks: Vec<CheckResult>,
}

impl CellOutput {
    fn file(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push(OutputFile {
            name: name.to_string(),
            bytes,
        });
    }

    fn csv<F>(&mut self, name: &str, write: F) -> Result<()>
    where
        F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    {
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.file(name, buf);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.file(name, bytes);
        Ok(())
    }
}

pub type RunFn = fn(&Params, &Context) -> Result<CellOutput>;

pub struct OpSpec {
    /// Subcommand name.
    pub name: &'static str,
    pub about: &'static str,
    /// The mathematical object the operation computes, shown in reports.
    pub anchor: &'static str,
    /// Whether the output depends on a seed.
    pub stochastic: bool,
    pub params: &'static [ParamSpec],
    /// Overrides that make a quick run (used by the determinism check).
    pub smoke: &'static [(&'static str, &'static str)],
    pub run: RunFn,
}

impl std::fmt::Debug for OpSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OpSpec")
            .field("name", &self.name)
            .finish_non_exhaustive()
    }
}

impl OpSpec {
    pub fn param(&self, name: &str) -> Result<&ParamSpec> {
        self.params.iter().find(|p| p.name == name).ok_or_else(|| {
            Error::config(format!("operation {} has no parameter {name:?}", self.name))
        })
    }

    /// Defaults overridden by `given`; every name must belong to the schema.
    pub fn resolve(&self, given: &BTreeMap<String, ParamValue>) -> Result<Params> {
        let mut out = BTreeMap::new();
        for p in self.params {
            out.insert(p.name.to_string(), p.parse(p.default)?);
        }
        for (k, v) in given {
            let spec = self.param(k)?;
            spec.check(v)?;
            let v = match (spec.kind, v) {
                (Kind::Float, ParamValue::Int(i)) => ParamValue::Float(*i as f64),
                (Kind::Float, ParamValue::Float(_))
                | (Kind::Int, ParamValue::Int(_))
                | (Kind::Bool, ParamValue::Bool(_))
                | (Kind::Text, ParamValue::Text(_))
                | (Kind::List, ParamValue::List(_)) => v.clone(),
                _ => {
                    return Err(Error::config(format!(
                        "parameter {k}: expected {:?}, got {v}",
                        spec.kind
                    )))
                }
            };
            out.insert(k.clone(), v);
        }
        Ok(Params(out))
    }

    /// Resolve command-line style `name=value` text pairs.
    pub fn resolve_text<'a, I>(&self, pairs: I) -> Result<Params>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut given = BTreeMap::new();
        for (k, v) in pairs {
            given.insert(k.to_string(), self.param(k)?.parse(v)?);
        }
        self.resolve(&given)
    }

    pub fn smoke_params(&self) -> Result<Params> {
        self.resolve_text(self.smoke.iter().copied())
    }
}

pub fn registry() -> &'static [OpSpec] {
    REGISTRY
}

pub fn lookup(name: &str) -> Result<&'static OpSpec> {
    REGISTRY
        .iter()
        .find(|op| op.name == name)
        .ok_or_else(|| Error::config(format!("unknown operation {name:?}")))
}

use Bound::*;
use Kind::*;

const ALPHA: ParamSpec = param(
    "alpha",
    Float,
    "1",
    Positive,
    "exponent α of the rate near its maximum",
);
const BETA: ParamSpec = param(
    "beta",
    Float,
    "1",
    Positive,
    "coefficient β (ignored by sin_pow, which uses 2^-α)",
);
const FAMILY: ParamSpec = param(
    "family",
    Text,
    "sin_pow",
    Any,
    "rate family: sin_pow, pow_clamp, homogeneous or custom",
);
const TABLE: ParamSpec = param(
    "table",
    Text,
    "",
    Any,
    "rate table file for the custom family",
);
const SAMPLES: ParamSpec = param(
    "samples",
    Int,
    "10000",
    AtLeast(100.0),
    "Monte Carlo sample size",
);
const STEP: ParamSpec = param("step", Float, "0.01", Positive, "path discretisation step");
const ENVELOPE: ParamSpec = param(
    "envelope",
    Text,
    "none",
    Any,
    "correction of the weight: none, plus or minus",
);
const ENV_L: ParamSpec = param("env_l", Float, "0.1", Positive, "envelope constant L");
const ENV_A: ParamSpec = param("env_a", Float, "1", Positive, "envelope exponent a");
const ENV_B: ParamSpec = param("env_b", Float, "1", Positive, "envelope exponent b");
const CAP: ParamSpec = param("cap", Int, "2000000", AtLeast(1.0), "population cap");

static REGISTRY: &[OpSpec] = &[
    OpSpec {
        name: "rate",
        about: "Evaluate the branching rate b(θ) and tabulate it over one period",
        anchor: "branching rate b(θ) of the angle",
        stochastic: false,
        params: &[
            ALPHA,
            BETA,
            FAMILY,
            TABLE,
            param("theta", Float, "0", Any, "angle in radians"),
        ],
        smoke: &[],
        run: op_rate,
    },
    OpSpec {
        name: "centering",
        about: "Derived constants κ, ϑ₁, ϑ₂ and the centering m(t), m⁺(t)",
        anchor: "centering m(t) and the barrier m⁺(s)",
        stochastic: false,
        params: &[
            ALPHA,
            BETA,
            FAMILY,
            TABLE,
            param("t", Float, "1000", Above(1.0), "time"),
        ],
        smoke: &[],
        run: op_centering,
    },
    OpSpec {
        name: "conjectures",
        about: "Conjectured log-corrections for α = 2 and α > 2",
        anchor: "conjectured log-corrections outside the proven range",
        stochastic: false,
        params: &[ALPHA, BETA, FAMILY, TABLE],
        smoke: &[],
        run: op_conjectures,
    },
    OpSpec {
        name: "spectrum",
        about: "Eigenvalues and eigenfunctions of -f'' + q|x|^α f",
        anchor: "spectrum of the operator -f'' + q|x|^α f",
        stochastic: false,
        params: &[
            ALPHA,
            param("levels", Int, "10", AtLeast(1.0), "number of levels"),
            param(
                "accuracy",
                Float,
                "1e-8",
                Positive,
                "absolute eigenvalue accuracy",
            ),
            param(
                "q",
                Float,
                "1",
                Positive,
                "potential strength (rescaled from q = 1)",
            ),
        ],
        smoke: &[],
        run: op_spectrum,
    },
    OpSpec {
        name: "weyl",
        about: "Eigenvalues against the Weyl asymptote (n/c_α)^{2α/(α+2)}",
        anchor: "Weyl asymptotics of the eigenvalues",
        stochastic: false,
        params: &[
            ALPHA,
            param("levels", Int, "41", AtLeast(2.0), "number of levels"),
            param(
                "accuracy",
                Float,
                "1e-8",
                Positive,
                "absolute eigenvalue accuracy",
            ),
        ],
        smoke: &[],
        run: op_weyl,
    },
    OpSpec {
        name: "pde",
        about: "Fundamental solution of ∂_t u = ϱ(u'' - q(t)|x|^α u) from a point mass at ξ",
        anchor: "time-singular killed heat equation and its ground-state product form",
        stochastic: false,
        params: &[
            ALPHA,
            param("xi", Float, "0", Any, "start point ξ"),
            param("horizon", Float, "0.5", OpenUnit, "final time T"),
            param("rho", Float, "200", Positive, "time scale ϱ"),
            param(
                "schedule",
                Text,
                "singular",
                Any,
                "q(t): singular, lower, upper, constant or off",
            ),
            param(
                "q",
                Float,
                "1",
                Positive,
                "value of q for the constant schedule",
            ),
            param("h", Float, "0.01", Positive, "space step"),
            param(
                "x_max",
                Float,
                "0",
                NonNegative,
                "domain half-width (0 picks a default)",
            ),
            param("step_cap", Float, "0.002", Positive, "bound on ϱ q Δt"),
            param(
                "time_richardson",
                Bool,
                "false",
                Any,
                "extrapolate in the time step",
            ),
            param(
                "space_richardson",
                Bool,
                "false",
                Any,
                "extrapolate in the space step",
            ),
        ],
        smoke: &[],
        run: op_pde,
    },
    OpSpec {
        name: "barriers",
        about: "Piecewise barriers q_* ≤ (1-t)^{-α} ≤ q^* constant near both ends",
        anchor: "barrier pair q_* and q^* around (1-t)^{-α}",
        stochastic: false,
        params: &[
            ALPHA,
            param("horizon", Float, "0.5", OpenUnit, "final time T"),
            param(
                "rho",
                Float,
                "100",
                Positive,
                "ϱ used for the default choice of ε",
            ),
            param(
                "eps1",
                Float,
                "0",
                NonNegative,
                "left plateau length (0 picks the default)",
            ),
            param(
                "eps2",
                Float,
                "0",
                NonNegative,
                "right plateau length (0 picks the default)",
            ),
        ],
        smoke: &[],
        run: op_barriers,
    },
    OpSpec {
        name: "galerkin",
        about: "Galerkin matrices D, A and the coefficient flow c' = (-D(t) + A(t))c",
        anchor: "coefficient ODE in the moving eigenbasis",
        stochastic: false,
        params: &[
            ALPHA,
            param("modes", Int, "24", AtLeast(1.0), "number of modes N"),
            param("rho", Float, "100", Positive, "time scale ϱ"),
            param("horizon", Float, "0.4", OpenUnit, "final time T"),
            param("xi", Float, "0", Any, "start point ξ"),
            param(
                "schedule",
                Text,
                "singular",
                Any,
                "q(t): singular, lower, upper or constant",
            ),
            param(
                "q",
                Float,
                "1",
                Positive,
                "value of q for the constant schedule",
            ),
            param(
                "outputs",
                Int,
                "20",
                AtLeast(1.0),
                "number of output intervals",
            ),
        ],
        smoke: &[],
        run: op_galerkin,
    },
    OpSpec {
        name: "kernel-g",
        about: "Weighted kernel G(s,x;t,y) through the change of variables to the PDE",
        anchor: "kernel G from the PDE fundamental solution",
        stochastic: false,
        params: &[
            param("s", Float, "4", Positive, "start time"),
            param("x", Float, "0", Any, "start point"),
            param("t", Float, "16", Positive, "end time"),
            param("y", Float, "0.5", Any, "end point"),
            ALPHA,
            BETA,
            param("h", Float, "0.01", Positive, "space step of the PDE"),
            param("potential", Bool, "true", Any, "switch the killing on"),
        ],
        smoke: &[],
        run: op_kernel_g,
    },
    OpSpec {
        name: "c0-stability",
        about: "Drift |c₀(T) - c₀(0)| of the ground-state coefficient under both barriers",
        anchor: "stability of the ground-state coefficient under the barriers",
        stochastic: false,
        params: &[
            ALPHA,
            param("rhos", List, "100,200,400,800", Positive, "values of ϱ"),
            param("horizon", Float, "0.5", OpenUnit, "final time T"),
            param("xi", Float, "0", Any, "start point ξ"),
            param("modes", Int, "24", AtLeast(1.0), "number of modes N"),
        ],
        smoke: &[],
        run: op_c0_stability,
    },
    OpSpec {
        name: "mass",
        about: "Monte Carlo total mass E exp(-∫ β|B/(√2 r)|^α(1+f) dr)",
        anchor: "total mass of the weighted kernel and its envelope",
        stochastic: true,
        params: &[
            param("s", Float, "16", Positive, "start time"),
            param("x", Float, "0", Any, "start point"),
            param("t", Float, "64", Positive, "end time"),
            ALPHA,
            BETA,
            SAMPLES,
            STEP,
            ENVELOPE,
            ENV_L,
            ENV_A,
            ENV_B,
        ],
        smoke: &[("samples", "200"), ("t", "20"), ("step", "0.1")],
        run: op_mass,
    },
    OpSpec {
        name: "gtilde",
        about: "Monte Carlo bridge estimate of the weighted kernel G̃(s,x;t,y)",
        anchor: "weighted kernel G̃ by Brownian bridges",
        stochastic: true,
        params: &[
            param("s", Float, "4", Positive, "start time"),
            param("x", Float, "0", Any, "start point"),
            param("t", Float, "16", Positive, "end time"),
            param("y", Float, "0.5", Any, "end point"),
            ALPHA,
            BETA,
            SAMPLES,
            param("step", Float, "0.04", Positive, "path discretisation step"),
            ENVELOPE,
            ENV_L,
            ENV_A,
            ENV_B,
        ],
        smoke: &[("samples", "200")],
        run: op_gtilde,
    },
    OpSpec {
        name: "localize",
        about: "Share of G̃ carried by bridges leaving the tube |B_r| < r^{(κ+η)/2}",
        anchor: "localisation of the weighted bridges",
        stochastic: true,
        params: &[
            param("s", Float, "4", Positive, "start time"),
            param("x", Float, "0", Any, "start point"),
            param("t", Float, "16", Positive, "end time"),
            param("y", Float, "0", Any, "end point"),
            param("eta", Float, "0.5", Positive, "tube exponent η"),
            ALPHA,
            BETA,
            SAMPLES,
            param("step", Float, "0.04", Positive, "path discretisation step"),
        ],
        smoke: &[("samples", "200")],
        run: op_localize,
    },
    OpSpec {
        name: "alpha2",
        about: "Fitted exponent of E exp(-β∫(B_r/r)² dr) against (√(1+8β)-1)/4",
        anchor: "power-law exponent in the quadratic case α = 2",
        stochastic: true,
        params: &[
            BETA,
            param("t", Float, "1000", Positive, "end time"),
            param(
                "s_list",
                List,
                "6.737947,18.31564,49.78707,135.3353",
                Positive,
                "start times",
            ),
            param(
                "samples",
                Int,
                "100000",
                AtLeast(100.0),
                "Monte Carlo sample size",
            ),
            param("step", Float, "0.01", Positive, "step in log time"),
        ],
        smoke: &[("samples", "200"), ("step", "0.05")],
        run: op_alpha2,
    },
    OpSpec {
        name: "bridge",
        about: "Probability that a Brownian bridge reaches a level K: Monte Carlo and closed form",
        anchor: "barrier probability of a Brownian bridge",
        stochastic: true,
        params: &[
            param("s", Float, "0", NonNegative, "start time"),
            param("x", Float, "0", Any, "start point"),
            param("t", Float, "1", Positive, "end time"),
            param("y", Float, "0", Any, "end point"),
            param("k", Float, "1", Any, "level K"),
            param(
                "samples",
                Int,
                "100000",
                AtLeast(100.0),
                "Monte Carlo sample size",
            ),
            param("step", Float, "0.005", Positive, "path discretisation step"),
        ],
        smoke: &[("samples", "200")],
        run: op_bridge,
    },
    OpSpec {
        name: "bessel",
        about: "Transition density of the two-dimensional Bessel process",
        anchor: "radial transition density of planar Brownian motion",
        stochastic: false,
        params: &[
            param("r0", Float, "1", NonNegative, "start radius"),
            param("s", Float, "1", Positive, "elapsed time"),
            param("z", Float, "1", NonNegative, "end radius"),
        ],
        smoke: &[],
        run: op_bessel,
    },
    OpSpec {
        name: "simulate",
        about: "Exact simulation of the branching system; extremal statistics per snapshot",
        anchor: "maximal displacement M_t against the centering m(t)",
        stochastic: true,
        params: &[
            ALPHA,
            BETA,
            FAMILY,
            TABLE,
            param("t_end", Float, "8", Positive, "final time"),
            param("runs", Int, "1", AtLeast(1.0), "independent replicates"),
            param("snapshots", List, "", Positive, "extra snapshot times"),
            CAP,
            param(
                "positions",
                Bool,
                "false",
                Any,
                "write particle positions at each snapshot",
            ),
        ],
        smoke: &[("t_end", "3"), ("runs", "2"), ("positions", "true")],
        run: op_simulate,
    },
    OpSpec {
        name: "couple",
        about: "Runs at several α with shared randomness; checks the lineage inclusion chain",
        anchor: "monotone coupling in α",
        stochastic: true,
        params: &[
            param(
                "alphas",
                List,
                "0.5,1,2,4",
                Positive,
                "increasing exponents (inf for b ≡ 1)",
            ),
            FAMILY,
            param("t_end", Float, "10", Positive, "final time"),
            param(
                "snapshots",
                List,
                "2,4,6,8",
                Positive,
                "extra snapshot times",
            ),
            CAP,
        ],
        smoke: &[("t_end", "3"), ("snapshots", "1,2")],
        run: op_couple,
    },
    OpSpec {
        name: "discrete",
        about: "Lattice branching random walk with angle-dependent offspring law",
        anchor: "discrete-time lattice analogue",
        stochastic: true,
        params: &[
            ALPHA,
            BETA,
            FAMILY,
            TABLE,
            param(
                "generations",
                Int,
                "12",
                AtLeast(1.0),
                "number of generations",
            ),
            CAP,
        ],
        smoke: &[("generations", "6")],
        run: op_discrete,
    },
    OpSpec {
        name: "mto1",
        about: "Many-to-one identity: simulator against the weighted single-spine formula",
        anchor: "many-to-one identity",
        stochastic: true,
        params: &[
            ALPHA,
            BETA,
            FAMILY,
            TABLE,
            param("t", Float, "2", Positive, "time"),
            param(
                "f",
                Text,
                "x_above",
                Any,
                "functional: one, zero, x_above, r_above or cylinder",
            ),
            param("x0", Float, "1", Any, "threshold of x_above and cylinder"),
            param("r0", Float, "1", Any, "threshold of r_above"),
            param("times", List, "", Positive, "cylinder times"),
            param("n_sim", Int, "2000", AtLeast(2.0), "simulator replicates"),
            param("n_mc", Int, "100000", AtLeast(2.0), "Monte Carlo paths"),
        ],
        smoke: &[("t", "1"), ("n_sim", "20"), ("n_mc", "200")],
        run: op_mto1,
    },
    OpSpec {
        name: "mto2",
        about: "Many-to-two identity: second factorial moment against the two-spine formula",
        anchor: "many-to-two identity",
        stochastic: true,
        params: &[
            ALPHA,
            BETA,
            FAMILY,
            TABLE,
            param("t", Float, "1.5", Positive, "time"),
            param(
                "f",
                Text,
                "one",
                Any,
                "first functional: one, zero, x_above or r_above",
            ),
            param(
                "g",
                Text,
                "one",
                Any,
                "second functional: one, zero, x_above or r_above",
            ),
            param("x0", Float, "1", Any, "threshold of x_above"),
            param("r0", Float, "1", Any, "threshold of r_above"),
            param("n_sim", Int, "20000", AtLeast(2.0), "simulator replicates"),
            param("n_mc", Int, "100000", AtLeast(2.0), "Monte Carlo paths"),
        ],
        smoke: &[("t", "1"), ("n_sim", "20"), ("n_mc", "200")],
        run: op_mto2,
    },
    OpSpec {
        name: "porism",
        about: "Angular position of the farthest particle and the gap M_t - max X",
        anchor: "farthest particle sits near the preferred direction",
        stochastic: true,
        params: &[
            ALPHA,
            BETA,
            FAMILY,
            TABLE,
            param("t_list", List, "4,8,12", Positive, "horizons"),
            param("runs", Int, "50", AtLeast(1.0), "replicates per horizon"),
            param(
                "eps",
                Float,
                "0.1",
                Positive,
                "margin ε in the exceedance threshold",
            ),
        ],
        smoke: &[("t_list", "2"), ("runs", "4")],
        run: op_porism,
    },
];

fn model_params(p: &Params) -> Result<ModelParams> {
    let alpha = p.f("alpha");
    let family = match p.s("family") {
        "sin_pow" => RateFamily::SinPow,
        "pow_clamp" => RateFamily::PowClamp,
        "homogeneous" => RateFamily::Homogeneous,
        "custom" => {
            let path = p.s("table");
            if path.is_empty() {
                return Err(Error::config("the custom family needs a rate table file"));
            }
            RateFamily::Custom(RateTable::from_file(Path::new(path))?)
        }
        other => return Err(Error::config(format!("unknown rate family {other:?}"))),
    };
    let beta = if matches!(family, RateFamily::SinPow) {
        2f64.powf(-alpha)
    } else {
        p.f("beta")
    };
    ModelParams::new(alpha, beta, family)
}

fn ground_state(alpha: f64) -> Result<EigenSystem> {
    spectral::solve_spectrum(alpha, 1, 1e-9)
}

fn constants(params: &ModelParams) -> Result<DerivedConstants> {
    DerivedConstants::for_model(params, ground_state(params.alpha)?.eigenvalues[0])
}

fn correction(p: &Params, alpha: f64) -> Result<Correction> {
    let make = || ErrorEnvelope::new(p.f("env_l"), p.f("env_a"), p.f("env_b"), alpha);
    Ok(match p.s("envelope") {
        "none" => Correction::None,
        "plus" => Correction::Plus(make()?),
        "minus" => Correction::Minus(make()?),
        other => return Err(Error::config(format!("unknown envelope {other:?}"))),
    })
}

fn mc_config(p: &Params, ctx: &Context) -> McConfig {
    McConfig {
        n_samples: p.n("samples"),
        step: p.f("step"),
        seed: ctx.seed,
        exec: ctx.exec,
    }
}

fn op_rate(p: &Params, _: &Context) -> Result<CellOutput> {
    let m = model_params(p)?;
    let mut out = CellOutput::default();
    out.csv("rate.csv", |w| {
        writeln!(w, "theta,rate")?;
        for i in 0..=360 {
            let th = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * i as f64 / 360.0;
            writeln!(w, "{th:e},{:e}", m.branching_rate(th))?;
        }
        Ok(())
    })?;
    out.summary = json!({
        "theta": p.f("theta"),
        "rate": model::branching_rate(p.f("theta"), &m),
        "family": m.rate_family.name(),
        "effective_beta": m.effective_beta(),
        "kappa": m.kappa(),
    });
    Ok(out)
}

fn op_centering(p: &Params, _: &Context) -> Result<CellOutput> {
    let m = model_params(p)?;
    let c = constants(&m)?;
    let t = p.f("t");
    let mut out = CellOutput::default();
    out.csv("centering.csv", |w| {
        writeln!(w, "t,m,m_plus")?;
        for i in 0..=100 {
            let s = (t.ln() * i as f64 / 100.0).exp().max(1.0 + 1e-12);
            let a = model::centering_m(s, &c).map_err(std::io::Error::other)?;
            let b = model::barrier_m_plus(s, &c).map_err(std::io::Error::other)?;
            writeln!(w, "{s:e},{a:e},{b:e}")?;
        }
        Ok(())
    })?;
    out.summary = json!({
        "constants": c,
        "log_coefficient": c.log_coefficient(),
        "t": t,
        "m": model::centering_m(t, &c)?,
        "m_plus": model::barrier_m_plus(t, &c)?,
        "in_theorem_range": m.alpha > 2.0 / 3.0 && m.alpha < 2.0,
    });
    Ok(out)
}

fn op_conjectures(p: &Params, _: &Context) -> Result<CellOutput> {
    let report = model::conjectured_corrections(&model_params(p)?);
    let mut out = CellOutput::default();
    out.file("conjectures.txt", report.to_text().into_bytes());
    out.summary = serde_json::to_value(&report)?;
    Ok(out)
}

fn op_spectrum(p: &Params, _: &Context) -> Result<CellOutput> {
    let mut sys = spectral::solve_spectrum(p.f("alpha"), p.n("levels"), p.f("accuracy"))?;
    let q = p.f("q");
    if q != 1.0 {
        sys = sys.rescale_to_q(q)?;
    }
    let mut out = CellOutput::default();
    out.csv("eigen.csv", |w| sys.write_csv(w))?;
    let sidecar = sys.sidecar();
    out.json("eigen.json", &sidecar)?;
    let worst = (0..sys.len())
        .map(|n| sys.residual(n) / (1.0 + sys.grid_eigenvalues[n]))
        .fold(0.0, f64::max);
    out.summary = json!({ "lambdas": sys.eigenvalues, "error_estimates": sys.error_estimates });
    out.checks.push(CheckResult::new(
        "scaled residual max|Lφ - λφ|/(1+λ)",
        worst,
        format!("<= {:e}", sys.accuracy),
        worst <= sys.accuracy,
    ));
    Ok(out)
}

fn op_weyl(p: &Params, _: &Context) -> Result<CellOutput> {
    let sys = spectral::solve_spectrum(p.f("alpha"), p.n("levels"), p.f("accuracy"))?;
    let report = spectral::weyl_check(&sys)?;
    let mut out = CellOutput::default();
    out.csv("weyl.csv", |w| {
        writeln!(w, "n,lambda,asymptote,relative_error")?;
        for i in 0..report.levels.len() {
            writeln!(
                w,
                "{},{:e},{:e},{:e}",
                report.levels[i],
                report.eigenvalues[i],
                report.asymptote[i],
                report.relative_errors[i]
            )?;
        }
        Ok(())
    })?;
    if let Some(i) = report.levels.iter().position(|&n| n == 40) {
        let e = report.relative_errors[i];
        out.checks.push(CheckResult::new(
            "relative error at n = 40",
            e,
            "< 0.02",
            e < 0.02,
        ));
    }
    out.summary = serde_json::to_value(&report)?;
    Ok(out)
}

fn schedule_for(p: &Params, alpha: f64, rho: f64, horizon: f64) -> Result<Schedule> {
    let barrier = |side| -> Result<Schedule> {
        let (e1, e2) = pde::choose_eps(rho, horizon, alpha)?;
        Ok(Schedule::Barrier(
            pde::build_barriers(horizon, e1, e2, alpha)?,
            side,
        ))
    };
    Ok(match p.s("schedule") {
        "singular" => Schedule::Singular,
        "lower" => barrier(Side::Lower)?,
        "upper" => barrier(Side::Upper)?,
        "constant" => Schedule::Constant(p.f("q")),
        "off" => Schedule::Off,
        other => return Err(Error::config(format!("unknown schedule {other:?}"))),
    })
}

fn op_pde(p: &Params, _: &Context) -> Result<CellOutput> {
    let (alpha, xi, horizon, rho) = (p.f("alpha"), p.f("xi"), p.f("horizon"), p.f("rho"));
    let schedule = schedule_for(p, alpha, rho, horizon)?;
    let opts = PdeOptions {
        h: p.f("h"),
        x_max: Some(p.f("x_max")).filter(|x| *x > 0.0),
        step_cap: p.f("step_cap"),
        time_richardson: p.b("time_richardson"),
        space_richardson: p.b("space_richardson"),
        ..Default::default()
    };
    let g = pde::fundamental_solution_g(xi, horizon, rho, alpha, &schedule, &opts, false)?;
    let mut out = CellOutput::default();
    out.csv("field.csv", |w| g.field.write_csv(w))?;
    let mut meta = g.field.metadata();
    meta["xi"] = json!(xi);
    meta["horizon"] = json!(horizon);
    meta["mass"] = json!(g.mass());
    if matches!(schedule, Schedule::Singular) {
        let sys = ground_state(alpha)?;
        let lambda0 = sys.eigenvalues[0];
        let k = model::kappa(alpha);
        let product = sys.phi(0, xi) * (1.0 - horizon).powf(-k / 4.0) * sys.phi(0, 0.0);
        let value = g.renormalized(0.0, lambda0)?;
        meta["renormalized_at_0"] = json!(value);
        meta["product_form_at_0"] = json!(product);
        meta["relative_deviation"] = json!((value - product) / product);
    }
    out.json("field.json", &meta)?;
    out.checks.push(CheckResult::new(
        "mass",
        g.mass(),
        "<= 1",
        g.mass() <= 1.0 + 1e-12,
    ));
    out.summary = meta;
    Ok(out)
}

fn op_barriers(p: &Params, _: &Context) -> Result<CellOutput> {
    let (alpha, horizon, rho) = (p.f("alpha"), p.f("horizon"), p.f("rho"));
    let (mut e1, mut e2) = (p.f("eps1"), p.f("eps2"));
    if e1 == 0.0 || e2 == 0.0 {
        let (d1, d2) = pde::choose_eps(rho, horizon, alpha)?;
        if e1 == 0.0 {
            e1 = d1;
        }
        if e2 == 0.0 {
            e2 = d2;
        }
    }
    let pair = pde::build_barriers(horizon, e1, e2, alpha)?;
    let mut out = CellOutput::default();
    let n = 10_000;
    let mut worst: f64 = 0.0;
    let mut rows = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let t = horizon * i as f64 / n as f64;
        let s = (1.0 - t).powf(-alpha);
        let (lo, hi) = (pair.lower_at(t), pair.upper_at(t));
        worst = worst.max((lo - s) / s).max((s - hi) / s);
        rows.push((t, lo, s, hi));
    }
    out.csv("barriers.csv", |w| {
        writeln!(w, "t,lower,singular,upper")?;
        for (t, lo, s, hi) in &rows {
            writeln!(w, "{t:e},{lo:e},{s:e},{hi:e}")?;
        }
        Ok(())
    })?;
    out.json("barriers.json", &pair)?;
    out.checks.push(CheckResult::new(
        "sandwich violation on 10^4 points",
        worst,
        "<= 1e-14",
        worst <= 1e-14,
    ));
    out.summary = json!({ "eps1": e1, "eps2": e2, "breakpoints": pair.breakpoints() });
    Ok(out)
}

fn op_galerkin(p: &Params, _: &Context) -> Result<CellOutput> {
    let (alpha, rho, horizon, xi) = (p.f("alpha"), p.f("rho"), p.f("horizon"), p.f("xi"));
    let n = p.n("modes");
    let schedule = schedule_for(p, alpha, rho, horizon)?;
    let sys = spectral::solve_spectrum(alpha, n, 1e-8)?;
    let mats = pde::galerkin_matrices(&sys, n)?;
    let c0 = pde::initial_coefficients(&sys, n, schedule.q(alpha, 0.0), xi);
    let k = p.n("outputs");
    let times: Vec<f64> = (0..=k).map(|i| horizon * i as f64 / k as f64).collect();
    let path = pde::evolve_coefficients(&c0, &schedule, rho, &mats, &times, &Default::default())?;
    let mut out = CellOutput::default();
    out.csv("coefficients.csv", |w| path.write_csv(w))?;
    let a_rows: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| mats.a[(i, j)]).collect())
        .collect();
    out.json(
        "matrices.json",
        &json!({ "lambdas": mats.lambdas, "d": mats.d, "a": a_rows, "defect": mats.defect }),
    )?;
    let tail =
        path.last().last().map_or(0.0, |c| c.abs()) / path.norms.last().copied().unwrap_or(1.0);
    out.checks.push(CheckResult::new(
        "antisymmetry defect of A",
        mats.defect,
        "<= 1e-5",
        mats.defect <= 1e-5,
    ));
    out.checks.push(CheckResult::new(
        "largest step increase of |c|",
        path.max_norm_increase,
        "<= 1e-10",
        path.norm_monotone(1e-10),
    ));
    out.summary = json!({
        "schedule": path.schedule,
        "steps": path.steps,
        "c_final": path.last(),
        "norms": path.norms,
        "tail_ratio": tail,
    });
    Ok(out)
}

fn op_kernel_g(p: &Params, _: &Context) -> Result<CellOutput> {
    let (s, x, t, y, alpha, beta) = (
        p.f("s"),
        p.f("x"),
        p.f("t"),
        p.f("y"),
        p.f("alpha"),
        p.f("beta"),
    );
    let schedule = if p.b("potential") {
        Schedule::Singular
    } else {
        Schedule::Off
    };
    let opts = PdeOptions {
        h: p.f("h"),
        ..Default::default()
    };
    let value = pde::kernel_g_from_g_with(s, x, t, y, beta, alpha, &schedule, &opts)?;
    let mut out = CellOutput {
        summary: json!({
            "value": value,
            "rho": pde::kernel_rho(beta, alpha, t),
            "heat_kernel": kernel::heat_kernel(x, y, t - s),
        }),
        ..Default::default()
    };
    out.json("kernel.json", &out.summary.clone())?;
    Ok(out)
}

fn op_c0_stability(p: &Params, _: &Context) -> Result<CellOutput> {
    let n = p.n("modes");
    let sys = spectral::solve_spectrum(p.f("alpha"), n, 1e-8)?;
    let report = pde::check_c0_stability(
        &sys,
        n,
        p.list("rhos"),
        p.f("horizon"),
        p.f("xi"),
        &Default::default(),
    )?;
    let mut out = CellOutput::default();
    out.json("c0.json", &report)?;
    out.summary = serde_json::to_value(&report)?;
    Ok(out)
}

fn op_mass(p: &Params, ctx: &Context) -> Result<CellOutput> {
    let (s, x, t, alpha, beta) = (p.f("s"), p.f("x"), p.f("t"), p.f("alpha"), p.f("beta"));
    let weight = Weight::new(alpha, beta)?.with_correction(correction(p, alpha)?);
    let est = kernel::estimate_total_mass(s, x, t, &weight, &mc_config(p, ctx))?;
    let mut summary = json!({ "estimate": est });
    if alpha < 2.0 {
        let c = DerivedConstants::new(alpha, beta, ground_state(alpha)?.eigenvalues[0])?;
        let k = c.kappa;
        let envelope =
            (t / s).powf(k / 4.0) * (c.theta1 * (s.powf(1.0 - k) - t.powf(1.0 - k))).exp();
        summary["envelope"] = json!(envelope);
        summary["ratio_to_envelope"] = json!(est.value / envelope);
    }
    let mut out = CellOutput::default();
    out.json("mass.json", &summary)?;
    out.summary = summary;
    Ok(out)
}

fn op_gtilde(p: &Params, ctx: &Context) -> Result<CellOutput> {
    let (alpha, beta) = (p.f("alpha"), p.f("beta"));
    let weight = Weight::new(alpha, beta)?.with_correction(correction(p, alpha)?);
    let est = kernel::estimate_gtilde(
        p.f("s"),
        p.f("x"),
        p.f("t"),
        p.f("y"),
        &weight,
        &mc_config(p, ctx),
    )?;
    let mut out = CellOutput {
        summary: json!({ "estimate": est }),
        ..Default::default()
    };
    out.json("gtilde.json", &out.summary.clone())?;
    Ok(out)
}

fn op_localize(p: &Params, ctx: &Context) -> Result<CellOutput> {
    let weight = Weight::new(p.f("alpha"), p.f("beta"))?;
    let report = kernel::localization_probe(
        p.f("s"),
        p.f("x"),
        p.f("t"),
        p.f("y"),
        p.f("eta"),
        &weight,
        &mc_config(p, ctx),
    )?;
    let mut out = CellOutput::default();
    out.json("localization.json", &report)?;
    out.summary = serde_json::to_value(report)?;
    Ok(out)
}

fn op_alpha2(p: &Params, ctx: &Context) -> Result<CellOutput> {
    let fit =
        kernel::alpha2_exponent_fit(p.f("beta"), p.list("s_list"), p.f("t"), &mc_config(p, ctx))?;
    let mut out = CellOutput::default();
    out.csv("alpha2.csv", |w| {
        writeln!(w, "s,estimate,stderr")?;
        for (s, e) in fit.s_list.iter().zip(&fit.estimates) {
            writeln!(w, "{s:e},{:e},{:e}", e.value, e.stderr)?;
        }
        Ok(())
    })?;
    let tol = 0.1 * fit.expected;
    out.checks.push(CheckResult::new(
        "fitted slope minus (√(1+8β)-1)/4",
        fit.slope - fit.expected,
        format!("|.| <= {tol:.4}"),
        (fit.slope - fit.expected).abs() <= tol,
    ));
    out.summary = serde_json::to_value(&fit)?;
    Ok(out)
}

fn op_bridge(p: &Params, ctx: &Context) -> Result<CellOutput> {
    let (s, x, t, y, k) = (p.f("s"), p.f("x"), p.f("t"), p.f("y"), p.f("k"));
    let exact = kernel::bridge_barrier_probability(s, x, t, y, k)?;
    let est = kernel::bridge_barrier_mc(s, x, t, y, k, &mc_config(p, ctx))?;
    let z = if est.stderr > 0.0 {
        (est.value - exact) / est.stderr
    } else {
        0.0
    };
    let mut out = CellOutput {
        summary: json!({ "exact": exact, "estimate": est, "z_score": z }),
        ..Default::default()
    };
    out.json("bridge.json", &out.summary.clone())?;
    out.checks
        .push(CheckResult::new("z-score", z, "|.| <= 3", z.abs() <= 3.0));
    Ok(out)
}

fn op_bessel(p: &Params, _: &Context) -> Result<CellOutput> {
    let (r0, s, z) = (p.f("r0"), p.f("s"), p.f("z"));
    let density = kernel::bessel_density(r0, s, z)?;
    let top = r0 + 12.0 * s.sqrt();
    let n = 4000;
    let h = top / n as f64;
    let values: Vec<f64> = (0..=n)
        .map(|i| kernel::bessel_density(r0, s, i as f64 * h))
        .collect::<Result<_>>()?;
    let mass = numeric::simpson(&values, h);
    let mut out = CellOutput {
        summary: json!({ "density": density, "total_mass": mass }),
        ..Default::default()
    };
    out.json("bessel.json", &out.summary.clone())?;
    out.checks.push(CheckResult::new(
        "total mass - 1",
        mass - 1.0,
        "|.| <= 1e-6",
        (mass - 1.0).abs() <= 1e-6,
    ));
    Ok(out)
}

fn sim_config(p: &Params, ctx: &Context, m: &ModelParams) -> Result<SimConfig> {
    let mut cfg = SimConfig::new(p.f("t_end"), ctx.seed);
    cfg.snapshot_times = p.list("snapshots").to_vec();
    cfg.cap = p.n("cap");
    if !matches!(m.rate_family, RateFamily::Homogeneous) {
        let c = constants(m)?;
        cfg.theta1 = c.theta1;
        cfg.kappa = c.kappa;
    }
    Ok(cfg)
}

fn op_simulate(p: &Params, ctx: &Context) -> Result<CellOutput> {
    let m = model_params(p)?;
    let mut cfg = sim_config(p, ctx, &m)?;
    cfg.record_positions = p.b("positions");
    let runs = sim::run_replicates(&m, &cfg, p.n("runs"), ctx.exec)?;
    let mut out = CellOutput::default();
    out.csv("stats.csv", |w| sim::write_stats_csv(&runs, w))?;
    if cfg.record_positions {
        out.csv("snapshots.csv", |w| sim::write_snapshots_csv(&runs, w))?;
    }
    let centering = if matches!(m.rate_family, RateFamily::Homogeneous) {
        None
    } else {
        Some(constants(&m)?)
    };
    let mut rows = Vec::new();
    let n_stops = runs.iter().map(|r| r.stats.len()).min().unwrap_or(0);
    for j in 0..n_stops {
        let t = runs[0].stats[j].t;
        let col = |f: &dyn Fn(&sim::ExtremalStats) -> f64| -> Vec<f64> {
            runs.iter().map(|r| f(&r.stats[j])).collect()
        };
        let mut row = json!({
            "t": t,
            "median_M": numeric::median(&col(&|s| s.m_t)),
            "median_gap": numeric::median(&col(&|s| s.m_t - s.max_x)),
            "median_population": numeric::median(&col(&|s| s.population as f64)),
        });
        if let (Some(c), true) = (&centering, t > 1.0) {
            let mt = model::centering_m(t, c)?;
            row["m"] = json!(mt);
            row["median_M_minus_m"] = json!(numeric::median(&col(&|s| s.m_t - mt)));
        }
        rows.push(row);
    }
    let truncated = runs.iter().filter(|r| !r.population.is_exact()).count();
    out.summary = json!({ "runs": runs.len(), "truncated": truncated, "snapshots": rows });
    Ok(out)
}

fn op_couple(p: &Params, ctx: &Context) -> Result<CellOutput> {
    let family = p.s("family");
    let base = match family {
        "sin_pow" => ModelParams::sin_pow(1.0)?,
        "homogeneous" => ModelParams::homogeneous(),
        other => {
            return Err(Error::config(format!(
                "family {other:?} is not monotone in alpha and cannot be coupled"
            )));
        }
    };
    let mut cfg = SimConfig::new(p.f("t_end"), ctx.seed);
    cfg.snapshot_times = p.list("snapshots").to_vec();
    cfg.cap = p.n("cap");
    let run = sim::run_coupled(&base, p.list("alphas"), &cfg, ctx.exec)?;
    let mut out = CellOutput::default();
    out.csv("snapshots.csv", |w| {
        writeln!(w, "alpha,time,lineage_id,x,y")?;
        for (a, r) in run.alphas.iter().zip(&run.runs) {
            for s in &r.population.snapshots {
                for (id, (x, y)) in s.lineage_ids.iter().zip(&s.positions) {
                    writeln!(w, "{a:e},{:e},{id:032x},{x:e},{y:e}", s.time)?;
                }
            }
        }
        Ok(())
    })?;
    let sizes: Vec<usize> = run.runs.iter().map(|r| r.population.len()).collect();
    out.checks.push(CheckResult::new(
        "lineage sets nested at every snapshot",
        if run.nested { 1.0 } else { 0.0 },
        "= 1",
        run.nested,
    ));
    out.summary = json!({ "alphas": run.alphas, "final_population": sizes, "nested": run.nested });
    Ok(out)
}

fn op_discrete(p: &Params, ctx: &Context) -> Result<CellOutput> {
    let m = model_params(p)?;
    let run = sim::run_discrete(&m, p.n("generations"), ctx.seed, p.n("cap"))?;
    let mut out = CellOutput::default();
    out.csv("sizes.csv", |w| {
        writeln!(w, "generation,size")?;
        for (n, s) in run.sizes.iter().enumerate() {
            writeln!(w, "{n},{s}")?;
        }
        Ok(())
    })?;
    out.csv("bins.csv", |w| {
        writeln!(w, "lo,hi,events,splits,expected,variance,within_99")?;
        for b in &run.bins {
            writeln!(
                w,
                "{:e},{:e},{},{},{:e},{:e},{}",
                b.lo,
                b.hi,
                b.events,
                b.splits,
                b.expected,
                b.variance,
                b.within_99()
            )?;
        }
        Ok(())
    })?;
    out.csv("particles.csv", |w| {
        writeln!(w, "lineage_id,i,j")?;
        for q in &run.particles {
            writeln!(w, "{:032x},{},{}", q.lineage_id, q.site.0, q.site.1)?;
        }
        Ok(())
    })?;
    let outside = run
        .bins
        .iter()
        .filter(|b| b.events > 0 && !b.within_99())
        .count();
    out.checks.push(CheckResult::new(
        "angle bins outside the 99% interval",
        outside as f64,
        "= 0",
        outside == 0,
    ));
    out.summary = json!({ "sizes": run.sizes, "truncated_at": run.truncated_at });
    Ok(out)
}

fn functional(kind: &str, p: &Params) -> Result<Functional> {
    Ok(match kind {
        "one" => Functional::One,
        "zero" => Functional::Zero,
        "x_above" => Functional::XAbove { x0: p.f("x0") },
        "r_above" => Functional::RAbove { r0: p.f("r0") },
        "cylinder" => Functional::Cylinder {
            times: p.list("times").to_vec(),
            x0: p.f("x0"),
        },
        other => return Err(Error::config(format!("unknown functional {other:?}"))),
    })
}

fn moment_output(report: &sim::MomentReport) -> Result<CellOutput> {
    let mut out = CellOutput::default();
    out.json("moment.json", report)?;
    out.checks.push(CheckResult::new(
        "z-score",
        report.z_score,
        "|.| <= 3",
        report.z_score.abs() <= 3.0,
    ));
    out.summary = serde_json::to_value(report)?;
    Ok(out)
}

fn op_mto1(p: &Params, ctx: &Context) -> Result<CellOutput> {
    let m = model_params(p)?;
    let f = functional(p.s("f"), p)?;
    let report = sim::many_to_one_check(
        &m,
        p.f("t"),
        &f,
        p.n("n_sim"),
        p.n("n_mc"),
        ctx.seed,
        ctx.exec,
    )?;
    moment_output(&report)
}

fn op_mto2(p: &Params, ctx: &Context) -> Result<CellOutput> {
    let m = model_params(p)?;
    let f = functional(p.s("f"), p)?;
    let g = functional(p.s("g"), p)?;
    let report = sim::many_to_two_check(
        &m,
        p.f("t"),
        &f,
        &g,
        p.n("n_sim"),
        p.n("n_mc"),
        ctx.seed,
        ctx.exec,
    )?;
    moment_output(&report)
}

fn op_porism(p: &Params, ctx: &Context) -> Result<CellOutput> {
    let m = model_params(p)?;
    let report = sim::porism_probe(
        &m,
        p.list("t_list"),
        p.n("runs"),
        p.f("eps"),
        ctx.seed,
        ctx.exec,
    )?;
    let mut out = CellOutput::default();
    out.csv("porism.csv", |w| {
        writeln!(w, "t,replicates,y_ratio_q10,y_ratio_q50,y_ratio_q90,exceedance,gap_q10,gap_q50,gap_q90,min_gap,truncated")?;
        for r in &report.rows {
            let [a, b, c] = r.y_ratio_quantiles;
            let [d, e, f] = r.gap_quantiles;
            writeln!(
                w,
                "{:e},{},{a:e},{b:e},{c:e},{:e},{d:e},{e:e},{f:e},{:e},{}",
                r.t, r.replicates, r.exceedance, r.min_gap, r.truncated
            )?;
        }
        Ok(())
    })?;
    out.summary = serde_json::to_value(&report)?;
    Ok(out)
}
