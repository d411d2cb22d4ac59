//! JSON problem files: the on-disk description of a perturbation problem
//! (knots, scaling, seed, base rule, ambient space) and its assembly into
//! validated spec objects.
//!
//! Schema sketch:
//!
//! ```json
//! {
//!   "knots": [0.0, 0.5, 1.0],
//!   "alpha": {"kind": "const", "values": [0.4, 0.4]},
//!   "seed":  {"kind": "expr", "expr": "x^2", "derivs": ["2*x", "2"]},
//!   "base":  {"kind": "explicit", "expr": "x"},
//!   "space": {"kind": "lp", "p": 2.0},
//!   "grid_level": 12
//! }
//! ```
//!
//! `alpha.kind` may be `"sampled"` with per-subinterval expressions; `base`
//! may name an operator (`"endpoint-line"` or `"blend"` with `lambda`);
//! `p` accepts the string `"inf"`. Deserialization failures are parse
//! errors; everything after that reports through [`crate::FractalError`].

use serde::{Deserialize, Serialize};

use crate::error::{FractalError, Result};
use crate::expr::Expr;
use crate::grid::{GridFunction, DEFAULT_GRID_LEVEL};
use crate::ifs::{BaseRule, IfsSpec};
use crate::operator::{FractalTemplate, LinearBaseOperator};
use crate::partition::Partition;
use crate::scaling::ScalingProfile;
use crate::spaces::SpaceSpec;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Problem {
    pub knots: Vec<f64>,
    pub alpha: AlphaJson,
    pub seed: FnJson,
    pub base: BaseJson,
    pub space: SpaceJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_level: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum AlphaJson {
    Const { values: Vec<f64> },
    Sampled { exprs: Vec<String> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FnJson {
    Expr {
        expr: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        derivs: Option<Vec<String>>,
    },
    Samples {
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BaseJson {
    Explicit {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expr: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        values: Option<Vec<f64>>,
    },
    Operator {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda: Option<f64>,
    },
}

/// `p` / `sigma` values that may be the JSON string `"inf"`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Exponent {
    Number(f64),
    Text(String),
}

impl Exponent {
    pub fn value(&self) -> Result<f64> {
        match self {
            Exponent::Number(v) => Ok(*v),
            Exponent::Text(s) if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") => {
                Ok(f64::INFINITY)
            }
            Exponent::Text(s) => Err(FractalError::SpecInvalid {
                reason: format!("bad exponent `{s}` (number or \"inf\")"),
            }),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SpaceJson {
    Bounded,
    Lp { p: Exponent },
    Ck { k: usize },
    Sobolev { k: usize, p: Exponent },
    Hoelder { k: usize, sigma: f64 },
}

impl SpaceJson {
    pub fn to_space(&self) -> Result<SpaceSpec> {
        match self {
            SpaceJson::Bounded => Ok(SpaceSpec::Bounded),
            SpaceJson::Lp { p } => SpaceSpec::lp(p.value()?),
            SpaceJson::Ck { k } => Ok(SpaceSpec::Ck { k: *k }),
            SpaceJson::Sobolev { k, p } => SpaceSpec::sobolev(*k, p.value()?),
            SpaceJson::Hoelder { k, sigma } => SpaceSpec::hoelder(*k, *sigma),
        }
    }

    pub fn from_space(space: &SpaceSpec) -> SpaceJson {
        fn exp(p: f64) -> Exponent {
            if p.is_infinite() {
                Exponent::Text("inf".into())
            } else {
                Exponent::Number(p)
            }
        }
        match space {
            SpaceSpec::Bounded => SpaceJson::Bounded,
            SpaceSpec::Lp { p } => SpaceJson::Lp { p: exp(*p) },
            SpaceSpec::Ck { k } => SpaceJson::Ck { k: *k },
            SpaceSpec::Sobolev { k, p } => SpaceJson::Sobolev { k: *k, p: exp(*p) },
            SpaceSpec::Hoelder { k, sigma } => SpaceJson::Hoelder {
                k: *k,
                sigma: *sigma,
            },
        }
    }
}

/// Parses a CLI-style space descriptor: `bounded`, `lp:2`, `lp:inf`,
/// `ck:1`, `sobolev:1,2`, `hoelder:1,0.5`.
pub fn parse_space_descriptor(text: &str) -> Result<SpaceSpec> {
    let bad = |why: &str| FractalError::SpecInvalid {
        reason: format!("space descriptor `{text}`: {why}"),
    };
    let (head, rest) = match text.split_once(':') {
        Some((h, r)) => (h, Some(r)),
        None => (text, None),
    };
    let parse_p = |s: &str| -> Result<f64> {
        if s.eq_ignore_ascii_case("inf") {
            Ok(f64::INFINITY)
        } else {
            s.parse().map_err(|_| bad("bad exponent"))
        }
    };
    match head {
        "bounded" => Ok(SpaceSpec::Bounded),
        "lp" => SpaceSpec::lp(parse_p(rest.ok_or_else(|| bad("missing p"))?)?),
        "ck" => {
            let k = rest
                .ok_or_else(|| bad("missing k"))?
                .parse()
                .map_err(|_| bad("bad k"))?;
            Ok(SpaceSpec::Ck { k })
        }
        "sobolev" => {
            let r = rest.ok_or_else(|| bad("missing k,p"))?;
            let (ks, ps) = r.split_once(',').ok_or_else(|| bad("need k,p"))?;
            SpaceSpec::sobolev(
                ks.parse().map_err(|_| bad("bad k"))?,
                parse_p(ps)?,
            )
        }
        "hoelder" => {
            let r = rest.ok_or_else(|| bad("missing k,sigma"))?;
            let (ks, ss) = r.split_once(',').ok_or_else(|| bad("need k,sigma"))?;
            SpaceSpec::hoelder(
                ks.parse().map_err(|_| bad("bad k"))?,
                ss.parse().map_err(|_| bad("bad sigma"))?,
            )
        }
        _ => Err(bad("unknown space kind")),
    }
}

impl Problem {
    /// Pure deserialization; schema violations surface as parse errors.
    pub fn from_json(text: &str) -> std::result::Result<Problem, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn grid_level(&self, override_level: Option<u32>) -> u32 {
        override_level
            .or(self.grid_level)
            .unwrap_or(DEFAULT_GRID_LEVEL)
    }

    fn sample_fn(&self, spec: &FnJson, lo: f64, hi: f64, m: u32) -> Result<GridFunction> {
        match spec {
            FnJson::Expr { expr, derivs } => {
                let parsed = Expr::parse(expr)?;
                let mut gf = GridFunction::sample(lo, hi, m, |x| parsed.eval(x));
                if let Some(ds) = derivs {
                    let n = gf.len();
                    let mut stacks = Vec::with_capacity(ds.len());
                    for d in ds {
                        let pd = Expr::parse(d)?;
                        stacks.push(
                            (0..n)
                                .map(|j| pd.eval(lo + (hi - lo) * j as f64 / (n - 1) as f64))
                                .collect(),
                        );
                    }
                    gf = gf.with_derivs(stacks)?;
                }
                Ok(gf)
            }
            FnJson::Samples { values } => {
                // resample arbitrary-length sample vectors onto the grid
                let coarse = GridFunction::from_samples(lo, hi, values.clone())?;
                Ok(GridFunction::sample(lo, hi, m, |x| coarse.eval_clamped(x)))
            }
        }
    }

    fn scaling(&self, lo: f64, hi: f64, m: u32) -> Result<ScalingProfile> {
        match &self.alpha {
            AlphaJson::Const { values } => Ok(ScalingProfile::constant(values.clone())),
            AlphaJson::Sampled { exprs } => {
                let mut fns = Vec::with_capacity(exprs.len());
                for e in exprs {
                    let parsed = Expr::parse(e)?;
                    fns.push(GridFunction::sample(lo, hi, m, |x| parsed.eval(x)));
                }
                Ok(ScalingProfile::sampled(fns))
            }
        }
    }

    fn base_operator(&self) -> Result<Option<LinearBaseOperator>> {
        match &self.base {
            BaseJson::Explicit { .. } => Ok(None),
            BaseJson::Operator { name, lambda } => match name.as_str() {
                "endpoint-line" => Ok(Some(LinearBaseOperator::EndpointLine)),
                "blend" => {
                    let lambda = lambda.ok_or_else(|| FractalError::SpecInvalid {
                        reason: "blend operator needs a lambda".into(),
                    })?;
                    Ok(Some(LinearBaseOperator::ScaledIdentityBlend { lambda }))
                }
                other => Err(FractalError::SpecInvalid {
                    reason: format!("unknown base operator `{other}`"),
                }),
            },
        }
    }

    /// Builds the full validated spec.
    pub fn assemble(
        &self,
        grid_level: Option<u32>,
        space_override: Option<SpaceSpec>,
    ) -> Result<IfsSpec> {
        let partition = Partition::new(self.knots.clone())?;
        let (lo, hi) = (partition.lo(), partition.hi());
        let m = self.grid_level(grid_level);
        let space = match space_override {
            Some(s) => s,
            None => self.space.to_space()?,
        };
        let seed = self.sample_fn(&self.seed, lo, hi, m)?;
        let scaling = self.scaling(lo, hi, m)?;
        let base = match (&self.base, self.base_operator()?) {
            (_, Some(op)) => BaseRule::Operator(op),
            (BaseJson::Explicit { expr, values }, None) => {
                let fnspec = match (expr, values) {
                    (Some(e), None) => FnJson::Expr {
                        expr: e.clone(),
                        derivs: None,
                    },
                    (None, Some(v)) => FnJson::Samples { values: v.clone() },
                    _ => {
                        return Err(FractalError::SpecInvalid {
                            reason: "explicit base needs exactly one of `expr` or `values`".into(),
                        })
                    }
                };
                BaseRule::Explicit(self.sample_fn(&fnspec, lo, hi, m)?)
            }
            (BaseJson::Operator { .. }, None) => unreachable!("operator handled above"),
        };
        IfsSpec::new(partition, scaling, seed, base, space)
    }

    /// Operator-style template; fails when the base rule is explicit.
    pub fn template(
        &self,
        grid_level: Option<u32>,
        space_override: Option<SpaceSpec>,
    ) -> Result<(FractalTemplate, GridFunction)> {
        let op = self.base_operator()?.ok_or_else(|| FractalError::SpecInvalid {
            reason: "this command needs a base of kind `operator`".into(),
        })?;
        let partition = Partition::new(self.knots.clone())?;
        let (lo, hi) = (partition.lo(), partition.hi());
        let m = self.grid_level(grid_level);
        let space = match space_override {
            Some(s) => s,
            None => self.space.to_space()?,
        };
        let seed = self.sample_fn(&self.seed, lo, hi, m)?;
        let scaling = self.scaling(lo, hi, m)?;
        Ok((
            FractalTemplate {
                partition,
                scaling,
                base: op,
                space,
            },
            seed,
        ))
    }
}
