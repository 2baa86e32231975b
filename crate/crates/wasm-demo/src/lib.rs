//! Browser bindings. Every entry point takes plain strings and numbers and
//! returns a JSON string; failures come back as `{"error": {"code", "message"}}`.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use tlf::bt_ops::cubical_projectors;
use tlf::forms::separate;
use tlf::geom::global_residue_sum;
use tlf::residue::res_tlf_detailed;
use tlf::scalars::{BaseKind, ExtField, ExtScalar};
use tlf::series::Series;
use tlf::syntax::{format_form, parse_form, parse_rational_form};
use tlf::tlf::{LiftingSystem, TlfDescriptor};
use tlf::{Error, Result};

fn respond(r: Result<Value>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": { "code": e.code(), "message": e.to_string() } }).to_string(),
    }
}

/// `ext_poly` lists the coefficients of the constant-field polynomial, lowest first,
/// separated by commas; empty for the base field itself.
fn field(characteristic: u32, ext_poly: &str) -> Result<std::sync::Arc<ExtField>> {
    let kind = BaseKind::from_char(characteristic)?;
    let ext_poly = ext_poly.trim();
    if ext_poly.is_empty() {
        return Ok(ExtField::trivial(kind));
    }
    let coeffs = ext_poly
        .split(',')
        .map(|c| {
            c.trim()
                .parse::<i64>()
                .map_err(|_| Error::Domain(format!("extension coefficient {c:?} is not an integer")))
        })
        .collect::<Result<Vec<_>>>()?;
    ExtField::from_i64s(kind, &coeffs)
}

#[wasm_bindgen]
pub fn residue(characteristic: u32, ext_poly: &str, n: usize, window: i32, form: &str) -> String {
    respond((|| {
        if n == 0 {
            return Err(Error::Domain("n must be at least 1".into()));
        }
        let k = TlfDescriptor::new(n, field(characteristic, ext_poly)?).with_window(window as i64);
        let p = parse_form(&k.field, form)?;
        let w = separate(&p.form, &p.context(&k)?)?;
        let mut out = res_tlf_detailed(&w)?.to_json();
        out["form"] = json!(format_form(&p));
        out["separated"] = json!(w.to_string());
        Ok(out)
    })())
}

/// For each `t1^i t2^j` with `|i|, |j| <= radius`, the label of the cubical
/// projector that keeps it.
#[wasm_bindgen(js_name = projectorGrid)]
pub fn projector_grid(characteristic: u32, radius: i32) -> String {
    respond((|| {
        let f = ExtField::trivial(BaseKind::from_char(characteristic)?);
        let k = TlfDescriptor::new(2, f.clone());
        let ps = cubical_projectors(&k, &LiftingSystem::standard(2))?;
        let labels: Vec<String> = ps.iter().map(|(e, _)| e.iter().map(u8::to_string).collect()).collect();
        let mut rows = Vec::new();
        let radius = radius as i64;
        for j in (-radius..=radius).rev() {
            let mut row = Vec::new();
            for i in -radius..=radius {
                let x = Series::monomial(&f, &[i, j], ExtScalar::one(&f));
                let mut hit = None;
                for (idx, (_, p)) in ps.iter().enumerate() {
                    if !p.apply(&x)?.is_exact_zero() {
                        hit = Some(idx);
                    }
                }
                row.push(json!({ "i": i, "j": j, "label": hit.map(|h| labels[h].clone()) }));
            }
            rows.push(Value::Array(row));
        }
        Ok(json!({ "radius": radius, "labels": labels, "rows": rows }))
    })())
}

#[wasm_bindgen(js_name = globalSum)]
pub fn global_sum(characteristic: u32, form: &str) -> String {
    respond((|| {
        let kind = BaseKind::from_char(characteristic)?;
        Ok(global_residue_sum(&parse_rational_form(kind, form)?)?.to_json())
    })())
}
