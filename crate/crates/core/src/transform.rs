//! Scalar functions `h` applied to matrix spectra.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};

type ScalarFn = dyn Fn(f64) -> f64 + Send + Sync;

/// The function `h` whose matrix value `h(A)` is being estimated.
#[derive(Clone)]
pub enum Transform {
    Identity,
    Inverse,
    Sqrt,
    Square,
    InverseSquare,
    Constant(f64),
    /// `t / (t^2 + λ^2)`.
    RegularizedPseudoinverse { lambda: f64 },
    /// `1/t` for `|t| > cutoff`, zero otherwise.
    Pseudoinverse { cutoff: f64 },
    /// Coefficients in increasing degree: `c0 + c1 t + c2 t^2 + ...`.
    Polynomial(Vec<f64>),
    Custom { name: String, f: Arc<ScalarFn> },
}

impl Transform {
    pub fn custom(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Transform::Custom {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Transform::Identity => t,
            Transform::Inverse => 1.0 / t,
            Transform::Sqrt => t.sqrt(),
            Transform::Square => t * t,
            Transform::InverseSquare => 1.0 / (t * t),
            Transform::Constant(c) => *c,
            Transform::RegularizedPseudoinverse { lambda } => t / (t * t + lambda * lambda),
            Transform::Pseudoinverse { cutoff } => {
                if t.abs() > *cutoff {
                    1.0 / t
                } else {
                    0.0
                }
            }
            Transform::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &ci| acc * t + ci),
            Transform::Custom { f, .. } => f(t),
        }
    }

    /// Evaluates at every value, failing on the first non-finite result.
    pub fn eval_all(&self, values: &[f64]) -> Result<Vec<f64>> {
        values
            .iter()
            .map(|&t| {
                let y = self.eval(t);
                if y.is_finite() {
                    Ok(y)
                } else {
                    Err(Error::NonFinite(format!("h({t}) = {y} for h = {self}")))
                }
            })
            .collect()
    }

    pub fn id(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transform::Identity => f.write_str("t"),
            Transform::Inverse => f.write_str("inv"),
            Transform::Sqrt => f.write_str("sqrt"),
            Transform::Square => f.write_str("square"),
            Transform::InverseSquare => f.write_str("inv-square"),
            Transform::Constant(c) => write!(f, "const({c})"),
            Transform::RegularizedPseudoinverse { lambda } => write!(f, "reg-pinv({lambda})"),
            Transform::Pseudoinverse { cutoff } => write!(f, "pinv({cutoff})"),
            Transform::Polynomial(c) => {
                let parts: Vec<String> = c.iter().map(|x| x.to_string()).collect();
                write!(f, "poly({})", parts.join(","))
            }
            Transform::Custom { name, .. } => f.write_str(name),
        }
    }
}

impl fmt::Debug for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Transform({self})")
    }
}

impl FromStr for Transform {
    type Err = Error;

    /// Accepts `t`, `inv`, `sqrt`, `square`, `inv-square`, `pinv`,
    /// `pinv:<cutoff>`, `reg-pinv:<lambda>` and `poly:c0,c1,...`.
    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let num = |a: Option<&str>, default: Option<f64>| -> Result<f64> {
            match a {
                Some(a) => a
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("bad numeric argument `{a}` in `{s}`"))),
                None => default.ok_or_else(|| Error::InvalidInput(format!("`{s}` needs an argument"))),
            }
        };
        match head {
            "t" | "identity" => Ok(Transform::Identity),
            "inv" | "1/t" => Ok(Transform::Inverse),
            "sqrt" => Ok(Transform::Sqrt),
            "square" | "t2" => Ok(Transform::Square),
            "inv-square" => Ok(Transform::InverseSquare),
            "pinv" => Ok(Transform::Pseudoinverse { cutoff: num(arg, Some(1e-8))? }),
            "reg-pinv" => Ok(Transform::RegularizedPseudoinverse { lambda: num(arg, None)? }),
            "poly" | "custom-poly" => {
                let arg = arg.ok_or_else(|| Error::InvalidInput("poly needs coefficients".into()))?;
                let coeffs = arg
                    .split(',')
                    .map(|c| {
                        c.trim()
                            .parse()
                            .map_err(|_| Error::InvalidInput(format!("bad coefficient `{c}`")))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                Ok(Transform::Polynomial(coeffs))
            }
            other => Err(Error::InvalidInput(format!("unknown function `{other}`"))),
        }
    }
}
