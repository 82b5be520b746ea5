//! Named presets such as `uniform(0, 1)`, `winding-golden` or
//! `conv(cantor-thirds, uniform(0, 1))`.

use std::fmt;

use crate::engine::Observable;
use crate::flow::{BoxSet, FourierSeries, SpectralModel, SpikeProfile, TorusWinding};
use crate::measure::{Density, IntervalTree, SelfSimilar, WeightMeasure};

/// A preset that failed to resolve, with the config field it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct PresetError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for PresetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for PresetError {}

#[derive(Clone, Debug, PartialEq)]
enum Arg {
    Number(f64),
    Call(Call),
}

#[derive(Clone, Debug, PartialEq)]
struct Call {
    name: String,
    args: Vec<Arg>,
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn token(&mut self, accept: impl Fn(u8) -> bool) -> &str {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && accept(self.src[self.pos]) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("")
    }

    fn arg(&mut self) -> Result<Arg, String> {
        match self.peek() {
            Some(c) if c.is_ascii_digit() || c == b'-' || c == b'+' || c == b'.' => {
                let tok = self.token(|c| c.is_ascii_alphanumeric() || b"+-.".contains(&c));
                tok.parse::<f64>().map(Arg::Number).map_err(|_| format!("`{tok}` is not a number"))
            }
            _ => self.call().map(Arg::Call),
        }
    }

    fn call(&mut self) -> Result<Call, String> {
        let name = self.token(|c| c.is_ascii_alphanumeric() || c == b'-' || c == b'_').to_string();
        if name.is_empty() {
            return Err(format!("expected a preset name at offset {}", self.pos));
        }
        let mut args = Vec::new();
        if self.peek() == Some(b'(') {
            self.pos += 1;
            if self.peek() == Some(b')') {
                self.pos += 1;
                return Ok(Call { name, args });
            }
            loop {
                args.push(self.arg()?);
                match self.peek() {
                    Some(b',') => self.pos += 1,
                    Some(b')') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return Err(format!("expected `,` or `)` at offset {}", self.pos)),
                }
            }
        }
        Ok(Call { name, args })
    }
}

fn parse(field: &str, text: &str) -> Result<Call, PresetError> {
    let err = |message: String| PresetError { field: field.to_string(), message };
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    let call = p.call().map_err(err)?;
    if p.peek().is_some() {
        return Err(err(format!("trailing input after `{}`", call.name)));
    }
    Ok(call)
}

struct Ctx<'a> {
    field: &'a str,
}

impl Ctx<'_> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, PresetError> {
        Err(PresetError { field: self.field.to_string(), message: message.into() })
    }

    fn numbers(&self, call: &Call, arity: &[usize]) -> Result<Vec<f64>, PresetError> {
        let nums: Option<Vec<f64>> =
            call.args.iter().map(|a| if let Arg::Number(x) = a { Some(*x) } else { None }).collect();
        match nums {
            Some(v) if arity.contains(&v.len()) => Ok(v),
            _ => self.err(format!(
                "`{}` takes {} numeric argument(s)",
                call.name,
                arity.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(" or ")
            )),
        }
    }

    fn count(&self, x: f64, what: &str) -> Result<u64, PresetError> {
        if x >= 0.0 && x.fract() == 0.0 && x < 2f64.powi(53) {
            Ok(x as u64)
        } else {
            self.err(format!("{what} must be a nonnegative integer"))
        }
    }

    fn measure(&self, call: &Call) -> Result<WeightMeasure, PresetError> {
        let m = match call.name.as_str() {
            "uniform" => {
                let v = self.numbers(call, &[0, 2])?;
                if v.is_empty() {
                    WeightMeasure::uniform(0.0, 1.0)
                } else {
                    WeightMeasure::uniform(v[0], v[1])
                }
            }
            "triangular" => {
                let v = self.numbers(call, &[3])?;
                WeightMeasure::Density(Density::Triangular { lo: v[0], mode: v[1], hi: v[2] })
            }
            "gaussian" => {
                let v = self.numbers(call, &[4])?;
                WeightMeasure::Density(Density::TruncatedGaussian { mean: v[0], sd: v[1], lo: v[2], hi: v[3] })
            }
            "cantor-thirds" => {
                self.numbers(call, &[0])?;
                WeightMeasure::cantor_thirds()
            }
            "dyadic-odd" => {
                self.numbers(call, &[0])?;
                WeightMeasure::SelfSimilar(SelfSimilar::dyadic_odd())
            }
            "dyadic-even" => {
                self.numbers(call, &[0])?;
                WeightMeasure::SelfSimilar(SelfSimilar::dyadic_even())
            }
            "cantor-tree" => {
                let v = self.numbers(call, &[1])?;
                let depth = self.count(v[0], "tree depth")? as usize;
                if !(1..=20).contains(&depth) {
                    return self.err("tree depth must be between 1 and 20");
                }
                WeightMeasure::NestedIntervals(IntervalTree::middle_thirds(depth))
            }
            "conv" => {
                if call.args.is_empty() {
                    return self.err("`conv` needs at least one measure");
                }
                let parts: Result<Vec<_>, _> = call
                    .args
                    .iter()
                    .map(|a| match a {
                        Arg::Call(c) => self.measure(c),
                        Arg::Number(_) => self.err("`conv` takes measures"),
                    })
                    .collect();
                WeightMeasure::Convolution { components: parts? }
            }
            "power" | "scale" => {
                let (Some(Arg::Call(inner)), Some(Arg::Number(x)), 2) =
                    (call.args.first(), call.args.get(1), call.args.len())
                else {
                    return self.err(format!("`{}` takes a measure and a number", call.name));
                };
                let inner = self.measure(inner)?;
                if call.name == "power" {
                    let n = self.count(*x, "power")?;
                    if n == 0 || n > 64 {
                        return self.err("power must be between 1 and 64");
                    }
                    inner.convolution_power(n as u32)
                } else {
                    inner.scale(*x)
                }
                .or_else(|e| self.err(e.to_string()))?
            }
            other => return self.err(format!("unknown measure preset `{other}`")),
        };
        if let Err(e) = m.validate() {
            return self.err(e.to_string());
        }
        Ok(m)
    }

    fn flow(&self, call: &Call) -> Result<TorusWinding, PresetError> {
        let f = match call.name.as_str() {
            "winding-golden" => {
                self.numbers(call, &[0])?;
                Ok(TorusWinding::golden())
            }
            "winding-pell" => {
                self.numbers(call, &[0])?;
                Ok(TorusWinding::pell())
            }
            "winding-cf" => {
                let v = self.numbers(call, &(1..=16).collect::<Vec<_>>())?;
                let period = v.iter().map(|x| self.count(*x, "partial quotient")).collect::<Result<Vec<_>, _>>()?;
                TorusWinding::periodic_fraction(period)
            }
            "winding-rational" => {
                let v = self.numbers(call, &[2])?;
                TorusWinding::rational(self.count(v[0], "numerator")?, self.count(v[1], "denominator")?)
            }
            "circle" => {
                self.numbers(call, &[0])?;
                Ok(TorusWinding::circle())
            }
            other => return self.err(format!("unknown flow preset `{other}`")),
        };
        f.or_else(|e| self.err(e.to_string()))
    }

    fn observable(&self, call: &Call, dim: usize) -> Result<Observable, PresetError> {
        let coordinate = |x: f64| -> Result<usize, PresetError> {
            let j = self.count(x, "coordinate")? as usize;
            if j == 0 || j > dim {
                return self.err(format!("coordinate must be between 1 and {dim}"));
            }
            Ok(j - 1)
        };
        Ok(match call.name.as_str() {
            "cos" => {
                let v = self.numbers(call, &[1])?;
                Observable::Fourier(FourierSeries::sqrt2_cos(dim, coordinate(v[0])?))
            }
            "char" => {
                let v = self.numbers(call, &[dim])?;
                if v.iter().any(|x| x.fract() != 0.0) {
                    return self.err("character indices must be integers");
                }
                Observable::Fourier(FourierSeries::character(v.iter().map(|x| *x as i64).collect()))
            }
            "box" => {
                let v = self.numbers(call, &[dim])?;
                Observable::Indicator(BoxSet::new(v).or_else(|e| self.err(e.to_string()))?)
            }
            "constant" => Observable::Constant { value: self.numbers(call, &[1])?[0] },
            other => return self.err(format!("unknown observable preset `{other}`")),
        })
    }

    fn spectrum(&self, call: &Call) -> Result<SpectralModel, PresetError> {
        let s = match call.name.as_str() {
            "spectral-lebesgue" => {
                self.numbers(call, &[0])?;
                SpectralModel::lebesgue()
            }
            "spectral-uniform" => {
                let v = self.numbers(call, &[2])?;
                SpectralModel::uniform(v[0], v[1])
            }
            "atom" => SpectralModel::atom(self.numbers(call, &[1])?[0]),
            "pair" => SpectralModel::symmetric_pair(self.numbers(call, &[1])?[0]),
            other => return self.err(format!("unknown spectral preset `{other}`")),
        };
        if let Err(e) = s.validate() {
            return self.err(e.to_string());
        }
        Ok(s)
    }

    /// Spike profiles are built to cover `|t(r − s)|` up to `reach`.
    fn spikes(&self, call: &Call, reach: f64) -> Result<SpikeProfile, PresetError> {
        let p = match call.name.as_str() {
            "spike" => {
                let v = self.numbers(call, &[3, 4])?;
                let first = v.get(3).copied().unwrap_or(10.0);
                SpikeProfile::geometric(first, v[0], v[1], v[2], reach.max(first))
            }
            "progression" => {
                let v = self.numbers(call, &[3])?;
                let count = ((reach / v[0]).ceil() as usize + 1).max(2);
                if count > 10_000_000 {
                    return self.err("progression would need more than 10^7 spikes");
                }
                SpikeProfile::progression(v[0], v[1], v[2], count)
            }
            other => return self.err(format!("unknown correlation preset `{other}`")),
        };
        p.or_else(|e| self.err(e.to_string()))
    }
}

pub fn measure(field: &str, text: &str) -> Result<WeightMeasure, PresetError> {
    Ctx { field }.measure(&parse(field, text)?)
}

pub fn flow(field: &str, text: &str) -> Result<TorusWinding, PresetError> {
    Ctx { field }.flow(&parse(field, text)?)
}

pub fn observable(field: &str, text: &str, dimension: usize) -> Result<Observable, PresetError> {
    Ctx { field }.observable(&parse(field, text)?, dimension)
}

pub fn spectrum(field: &str, text: &str) -> Result<SpectralModel, PresetError> {
    Ctx { field }.spectrum(&parse(field, text)?)
}

pub fn spike_profile(field: &str, text: &str, reach: f64) -> Result<SpikeProfile, PresetError> {
    Ctx { field }.spikes(&parse(field, text)?, reach)
}

/// A box `box(a₁, …, a_d)`.
pub fn box_set(field: &str, text: &str, dimension: usize) -> Result<BoxSet, PresetError> {
    match observable(field, text, dimension)? {
        Observable::Indicator(b) => Ok(b),
        _ => Err(PresetError { field: field.into(), message: "expected `box(...)`".into() }),
    }
}

const PRESETS: &[(&str, &str, &str)] = &[
    ("atom(w)", "spectral", "unit atom at frequency w"),
    ("box(a1, ..., ad)", "observable", "indicator of [0,a1) x ... x [0,ad)"),
    ("cantor-thirds", "measure", "middle-thirds Cantor measure (self-similar)"),
    ("cantor-tree(depth)", "measure", "middle-thirds nested intervals to the given depth"),
    ("char(k1, ..., kd)", "observable", "character exp(2 pi i k.x)"),
    ("circle", "flow", "unit-speed rotation of the circle"),
    ("constant(c)", "observable", "constant function"),
    ("conv(m1, m2, ...)", "measure", "convolution of measures"),
    ("cos(j)", "observable", "sqrt(2) cos(2 pi x_j), j from 1"),
    ("dyadic-even", "measure", "uniform on dyadic digits vanishing at odd positions"),
    ("dyadic-odd", "measure", "uniform on dyadic digits vanishing at even positions"),
    ("gaussian(mean, sd, lo, hi)", "measure", "truncated Gaussian density"),
    ("pair(w)", "spectral", "atoms of mass 1/2 at -w and w"),
    ("power(m, n)", "measure", "n-fold convolution power"),
    ("progression(step, width, height)", "correlation", "spikes at j*step, j = 1, 2, ..."),
    ("scale(m, a)", "measure", "pushforward under r -> a r"),
    ("spectral-lebesgue", "spectral", "uniform on [-1, 1]"),
    ("spectral-uniform(lo, hi)", "spectral", "uniform on [lo, hi]"),
    ("spike(growth, width, height[, first])", "correlation", "spikes at first*growth^j (first defaults to 10)"),
    ("triangular(lo, mode, hi)", "measure", "triangular density"),
    ("uniform(lo, hi)", "measure", "uniform density (defaults to [0, 1])"),
    ("winding-cf(a1, ..., ak)", "flow", "2-torus winding with slope [0; a1, ..., ak, a1, ...]"),
    ("winding-golden", "flow", "2-torus winding with slope (sqrt 5 - 1)/2"),
    ("winding-pell", "flow", "2-torus winding with slope sqrt 2 - 1"),
    ("winding-rational(p, q)", "flow", "periodic 2-torus winding with slope p/q"),
];

/// Every preset with its parameters, sorted by name.
pub fn list_presets() -> String {
    let width = PRESETS.iter().map(|(n, _, _)| n.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (name, kind, doc) in PRESETS {
        out.push_str(&format!("{name:<width$}  {kind:<11}  {doc}\n"));
    }
    out
}
