//! Instance strings: an MPS path or `builtin:name?key=value&...`.

use std::collections::BTreeMap;

use anyhow::{anyhow, bail, Context, Result};
use pdhg_lp::instances::{appendix_b, house, random_planted_lp};
use pdhg_lp::mps::read_mps_file;
use pdhg_lp::GeneralLp;

pub struct Instance {
    pub name: String,
    pub lp: GeneralLp,
}

struct Params {
    name: String,
    values: BTreeMap<String, String>,
}

impl Params {
    fn parse(spec: &str) -> Result<Params> {
        let (name, query) = spec.split_once('?').unwrap_or((spec, ""));
        let mut values = BTreeMap::new();
        for pair in query.split('&').filter(|p| !p.is_empty()) {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| anyhow!("parameter '{pair}' is not of the form key=value"))?;
            if values.insert(k.to_string(), v.to_string()).is_some() {
                bail!("parameter '{k}' given twice");
            }
        }
        Ok(Params {
            name: name.to_string(),
            values,
        })
    }

    fn take_f64(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.values.remove(key) {
            None => Ok(default),
            Some(v) => v.parse().with_context(|| format!("{}: '{key}' must be a number, got '{v}'", self.name)),
        }
    }

    fn take_usize(&mut self, key: &str, default: usize) -> Result<usize> {
        match self.values.remove(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .with_context(|| format!("{}: '{key}' must be a nonnegative integer, got '{v}'", self.name)),
        }
    }

    fn take_bool(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.values.remove(key).as_deref() {
            None => Ok(default),
            Some("true" | "1") => Ok(true),
            Some("false" | "0") => Ok(false),
            Some(v) => bail!("{}: '{key}' must be true or false, got '{v}'", self.name),
        }
    }

    fn finish(self) -> Result<()> {
        if let Some(k) = self.values.keys().next() {
            bail!("{}: unknown parameter '{k}'", self.name);
        }
        Ok(())
    }
}

/// Resolves an instance string.
pub fn load(spec: &str) -> Result<Instance> {
    let Some(builtin) = spec.strip_prefix("builtin:") else {
        let lp = read_mps_file(spec).with_context(|| format!("reading '{spec}'"))?;
        return Ok(Instance {
            name: spec.to_string(),
            lp,
        });
    };
    let mut p = Params::parse(builtin)?;
    let (name, lp) = match p.name.as_str() {
        "house" => {
            let kappa = p.take_f64("kappa", 0.5)?;
            let delta = p.take_f64("delta", 0.1)?;
            (format!("house(kappa={kappa}, delta={delta})"), house(kappa, delta)?)
        }
        "appendix-b" => {
            let kappa = p.take_f64("kappa", 1e-2)?;
            (format!("appendix-b(kappa={kappa})"), appendix_b(kappa)?.to_general())
        }
        "random" => {
            let m = p.take_usize("m", 20)?;
            let n = p.take_usize("n", 40)?;
            let degenerate = p.take_bool("degenerate", false)?;
            let seed = p.take_usize("seed", 0)? as u64;
            let (lp, _) = random_planted_lp(m, n, degenerate, seed)?;
            (format!("random(m={m}, n={n}, degenerate={degenerate}, seed={seed})"), lp.to_general())
        }
        other => bail!("unknown builtin instance '{other}' (expected house, appendix-b or random)"),
    };
    p.finish()?;
    Ok(Instance { name, lp })
}
