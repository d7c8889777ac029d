//! File formats and argument parsers used by the subcommands.

use std::fs;
use std::io::Write;
use std::path::Path;

use trussprox::{HardeningLaw, Point, TrussModel};

pub type CliResult<T> = Result<T, Box<dyn std::error::Error>>;

/// Parses `--law`.
///
/// Accepted forms: `isotropic[:h_ratio=R]`, `mixed[:theta=T,h_ratio=R]`,
/// `piecewise[:h1_ratio=A,h2_ratio=B,rs_ratio=C]`, or a path to a JSON file
/// holding a serialized law. Ratios are relative to member stiffness (and to
/// `R⁰` for `rs_ratio`).
pub fn parse_law(spec: &str, model: &TrussModel, r0: &[f64]) -> CliResult<HardeningLaw> {
    if spec.ends_with(".json") {
        let law: HardeningLaw = serde_json::from_str(&fs::read_to_string(spec)?)?;
        law.validate(model.num_members(), r0)?;
        return Ok(law);
    }
    let (kind, params) = spec.split_once(':').unwrap_or((spec, ""));
    let mut values = std::collections::BTreeMap::new();
    for item in params.split(',').filter(|s| !s.is_empty()) {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| format!("law parameter {item:?} is not key=value"))?;
        let value: f64 = value
            .parse()
            .map_err(|_| format!("law parameter {key:?}: bad number {value:?}"))?;
        values.insert(key.trim().to_string(), value);
    }
    let mut take = |key: &str, default: f64| values.remove(key).unwrap_or(default);
    let law = match kind {
        "isotropic" => HardeningLaw::isotropic_ratio(model, take("h_ratio", 0.1)),
        "mixed" => {
            let theta = take("theta", 0.5);
            HardeningLaw::mixed_ratio(model, theta, take("h_ratio", 0.1))
        }
        "piecewise" => {
            let h1 = take("h1_ratio", 0.1);
            let h2 = take("h2_ratio", 0.5);
            HardeningLaw::piecewise_ratio(model, h1, h2, r0, take("rs_ratio", 1.3))
        }
        other => return Err(format!("unknown law {other:?} (isotropic, mixed, piecewise)").into()),
    };
    if let Some(key) = values.keys().next() {
        return Err(format!("unknown parameter {key:?} for law {kind}").into());
    }
    law.validate(model.num_members(), r0)?;
    Ok(law)
}

/// Load file: a JSON array of `d` nodal forces in N.
pub fn read_load(path: &Path, num_dofs: usize) -> CliResult<Vec<f64>> {
    let f: Vec<f64> = serde_json::from_str(&fs::read_to_string(path)?)?;
    if f.len() != num_dofs {
        return Err(format!("load has {} entries, model has {num_dofs} DOFs", f.len()).into());
    }
    Ok(f)
}

pub fn write_load(path: &Path, f: &[f64]) -> CliResult<()> {
    fs::write(path, serde_json::to_string(f)?)?;
    Ok(())
}

/// Writes `block,index,value` rows for `v`, `p` and (when present) `s`.
pub fn write_solution<W: Write>(out: W, x: &Point) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["block", "index", "value"])?;
    for (name, values) in [("v", &x.v), ("p", &x.p), ("s", &x.s)] {
        for (i, v) in values.iter().enumerate() {
            w.write_record([name, &i.to_string(), &v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_solution(
    path: &Path,
    num_dofs: usize,
    num_members: usize,
    piecewise: bool,
) -> CliResult<Point> {
    let mut x = Point::zeros(num_dofs, num_members, piecewise);
    let mut seen = [
        vec![false; num_dofs],
        vec![false; num_members],
        vec![false; if piecewise { num_members } else { 0 }],
    ];
    let mut rdr = csv::Reader::from_path(path)?;
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 3 {
            return Err(format!("solution row has {} fields, expected 3", rec.len()).into());
        }
        let index: usize = rec[1]
            .parse()
            .map_err(|_| format!("bad index {:?}", &rec[1]))?;
        let value: f64 = rec[2]
            .parse()
            .map_err(|_| format!("bad value {:?}", &rec[2]))?;
        let (block, slot) = match &rec[0] {
            "v" => (&mut x.v, 0),
            "p" => (&mut x.p, 1),
            "s" => (&mut x.s, 2),
            other => return Err(format!("unknown solution block {other:?}").into()),
        };
        if index >= block.len() {
            return Err(
                format!("solution index {index} out of range for block {}", &rec[0]).into(),
            );
        }
        block[index] = value;
        seen[slot][index] = true;
    }
    if seen.iter().flatten().any(|s| !s) {
        return Err("solution file is missing entries".into());
    }
    Ok(x)
}
