//! Closed-form reference values printed as CSV.

use std::collections::BTreeMap;

use anyhow::{anyhow, bail, Result};
use nphoton::kernels::MaskSpec;
use nphoton::oracles::{
    fraunhofer_double_slit, gaussian_beam_width, imaging_params, rayleigh_range, solve_flatness_f2,
};
use nphoton::Wavelength;

use crate::bundle::fmt_f64;

pub const NAMES: [&str; 5] = ["double-slit", "flatness", "gaussian-beam", "imaging", "rayleigh-range"];

struct Params {
    values: BTreeMap<String, f64>,
    used: Vec<String>,
}

impl Params {
    fn parse(args: &[String]) -> Result<Self> {
        let mut values = BTreeMap::new();
        for a in args {
            let (k, v) = a
                .split_once('=')
                .ok_or_else(|| anyhow!("parameter `{a}` is not of the form key=value"))?;
            let v: f64 = v.trim().parse().map_err(|e| anyhow!("parameter `{k}`: {e}"))?;
            values.insert(canonical(k.trim()).to_string(), v);
        }
        Ok(Self {
            values,
            used: Vec::new(),
        })
    }

    fn get(&mut self, key: &str, default: Option<f64>) -> Result<f64> {
        self.used.push(key.to_string());
        match (self.values.get(key), default) {
            (Some(v), _) => Ok(*v),
            (None, Some(d)) => Ok(d),
            (None, None) => bail!("missing parameter `{key}`"),
        }
    }

    fn finish(&self) -> Result<()> {
        let extra: Vec<&String> = self.values.keys().filter(|k| !self.used.contains(k)).collect();
        if extra.is_empty() {
            Ok(())
        } else {
            bail!("unknown parameters: {extra:?} (accepted: {:?})", self.used)
        }
    }
}

fn canonical(key: &str) -> &str {
    match key {
        "λ" | "wavelength" => "lambda",
        "λ1" | "λ₁" => "lambda1",
        "λ2" | "λ₂" => "lambda2",
        "w₀" => "w0",
        "s₀" => "s0",
        "s₁" => "s1",
        "s₂" => "s2",
        "s₃" => "s3",
        "s₄" => "s4",
        "magnification" => "M",
        "δ" | "separation" => "delta",
        "w_s" | "width" => "w",
        "L" | "distance" => "L",
        other => other,
    }
}

/// Evaluates oracle `name` and returns the CSV text.
pub fn evaluate(name: &str, args: &[String]) -> Result<String> {
    let mut p = Params::parse(args)?;
    let out = match name {
        "gaussian-beam" => {
            let (w0, l, z) = (p.get("w0", None)?, p.get("lambda", None)?, p.get("z", None)?);
            let w = gaussian_beam_width(w0, Wavelength::new(l)?, z)?;
            format!("w_m\n{}\n", fmt_f64(w))
        }
        "rayleigh-range" => {
            let (w0, l) = (p.get("w0", None)?, p.get("lambda", None)?);
            format!("z_r_m\n{}\n", fmt_f64(rayleigh_range(w0, Wavelength::new(l)?)))
        }
        "imaging" => {
            let ip = imaging_params(p.get("s0", None)?, p.get("s1", None)?, p.get("s2", None)?)?;
            format!(
                "magnification,focal_length_m\n{},{}\n",
                fmt_f64(ip.magnification),
                fmt_f64(ip.focal_length)
            )
        }
        "flatness" => {
            let sol = solve_flatness_f2(
                Wavelength::new(p.get("lambda1", Some(0.8e-6))?)?,
                Wavelength::new(p.get("lambda2", Some(0.5e-6))?)?,
                p.get("M", Some(2.0))?,
                p.get("s0", None)?,
                p.get("s2", Some(0.6))?,
                p.get("s3", None)?,
                p.get("s4", None)?,
            )?;
            format!(
                "f2_m,feasible,lower_m,upper_m,target,residual\n{},{},{},{},{},{}\n",
                fmt_f64(sol.f2),
                sol.feasible,
                fmt_f64(sol.lower),
                fmt_f64(sol.upper),
                fmt_f64(sol.target),
                fmt_f64(sol.residual)
            )
        }
        "double-slit" => {
            let mask = MaskSpec::double_slit(
                p.get("delta", Some(200e-6))?,
                p.get("w", Some(10e-6))?,
                p.get("offset", Some(0.0))?,
                p.get("phase", Some(0.0))?,
            );
            let l = Wavelength::new(p.get("lambda", Some(0.5e-6))?)?;
            let distance = p.get("L", Some(1.0))?;
            let xs: Vec<f64> = if p.values.contains_key("x") {
                vec![p.get("x", None)?]
            } else {
                let (lo, hi, n) = (p.get("x_min", None)?, p.get("x_max", None)?, p.get("n", Some(101.0))?);
                if !(n >= 2.0 && n.fract() == 0.0) {
                    bail!("n must be an integer >= 2");
                }
                let n = n as usize;
                (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
            };
            let mut out = String::from("x_m,amplitude_re,amplitude_im,intensity\n");
            for x in xs {
                let a = fraunhofer_double_slit(&mask, l, distance, x)?;
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    fmt_f64(x),
                    fmt_f64(a.re),
                    fmt_f64(a.im),
                    fmt_f64(a.norm_sqr())
                ));
            }
            out
        }
        _ => bail!("unknown oracle `{name}`; available: {}", NAMES.join(", ")),
    };
    p.finish()?;
    Ok(out)
}
