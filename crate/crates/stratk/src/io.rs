//! JSON serialization for every document the tools exchange.
//!
//! All documents carry `"schema": "stratk-1"` and a `"kind"` tag; unknown
//! versions are rejected. Rational numbers travel as strings such as
//! `"-1/2"` so nothing is ever rounded. Emission is canonical: keys are
//! sorted, optional fields are dropped when absent, and re-reading an
//! emitted document reproduces it byte for byte.

use crate::bundle::VBundle;
use crate::complex::{Boundary, Cell, CellComplex, CellId, CellularMap, Layer, Step, StratifiedSpace};
use crate::error::{Error, Result};
use crate::ktheory::{KGroup, SumEntry};
use crate::lincat::{CatFlags, CatKind, Mor, Obj, OpenRule, StructureCategory};
use crate::matrix::{format_q, parse_q, QMat};
use crate::report::ValidationReport;
use crate::snf::ZMat;
use crate::strata::{AttachingVMap, StratifiedBundle};
use crate::tangent::{PolyCell, PolytopalManifold};
use serde_json::{json, Map, Value};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

pub const SCHEMA_VERSION: &str = "stratk-1";

/// Canonical text form: two-space pretty printing with sorted keys and a
/// trailing newline.
pub fn to_pretty_string(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializing JSON values cannot fail");
    s.push('\n');
    s
}

pub fn parse_str(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| Error::Schema(format!("malformed JSON: {e}")))
}

fn document(kind: &str, mut fields: Map<String, Value>) -> Value {
    fields.insert("schema".to_string(), Value::String(SCHEMA_VERSION.to_string()));
    fields.insert("kind".to_string(), Value::String(kind.to_string()));
    Value::Object(fields)
}

fn obj<'a>(v: &'a Value, ctx: &str) -> Result<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| Error::Schema(format!("{ctx}: expected an object")))
}

fn field<'a>(m: &'a Map<String, Value>, key: &str, ctx: &str) -> Result<&'a Value> {
    m.get(key).ok_or_else(|| Error::Schema(format!("{ctx}: missing field {key:?}")))
}

fn str_field<'a>(m: &'a Map<String, Value>, key: &str, ctx: &str) -> Result<&'a str> {
    field(m, key, ctx)?
        .as_str()
        .ok_or_else(|| Error::Schema(format!("{ctx}: field {key:?} must be a string")))
}

fn usize_field(m: &Map<String, Value>, key: &str, ctx: &str) -> Result<usize> {
    field(m, key, ctx)?
        .as_u64()
        .map(|n| n as usize)
        .ok_or_else(|| Error::Schema(format!("{ctx}: field {key:?} must be a nonnegative integer")))
}

fn arr_field<'a>(m: &'a Map<String, Value>, key: &str, ctx: &str) -> Result<&'a Vec<Value>> {
    field(m, key, ctx)?
        .as_array()
        .ok_or_else(|| Error::Schema(format!("{ctx}: field {key:?} must be an array")))
}

fn obj_field<'a>(m: &'a Map<String, Value>, key: &str, ctx: &str) -> Result<&'a Map<String, Value>> {
    field(m, key, ctx)?
        .as_object()
        .ok_or_else(|| Error::Schema(format!("{ctx}: field {key:?} must be an object")))
}

fn bool_field(m: &Map<String, Value>, key: &str, ctx: &str) -> Result<bool> {
    field(m, key, ctx)?
        .as_bool()
        .ok_or_else(|| Error::Schema(format!("{ctx}: field {key:?} must be a boolean")))
}

/// Checks the schema version and the kind tag, returning the field map.
pub fn expect_document<'a>(v: &'a Value, kind: &str) -> Result<&'a Map<String, Value>> {
    let m = obj(v, "document")?;
    let schema = str_field(m, "schema", "document")?;
    if schema != SCHEMA_VERSION {
        return Err(Error::Schema(format!(
            "unknown schema version {schema:?}, expected {SCHEMA_VERSION:?}"
        )));
    }
    let found = str_field(m, "kind", "document")?;
    if found != kind {
        return Err(Error::Schema(format!("expected a {kind:?} document, found {found:?}")));
    }
    Ok(m)
}

/// Schema-checked kind tag of any document; drives CLI dispatch.
pub fn document_kind(v: &Value) -> Result<String> {
    let m = obj(v, "document")?;
    let schema = str_field(m, "schema", "document")?;
    if schema != SCHEMA_VERSION {
        return Err(Error::Schema(format!(
            "unknown schema version {schema:?}, expected {SCHEMA_VERSION:?}"
        )));
    }
    Ok(str_field(m, "kind", "document")?.to_string())
}

pub fn qmat_to_json(a: &QMat) -> Value {
    let data: Vec<Value> = (0..a.rows())
        .map(|i| {
            Value::Array((0..a.cols()).map(|j| Value::String(format_q(a.at(i, j)))).collect())
        })
        .collect();
    json!({ "rows": a.rows(), "cols": a.cols(), "data": data })
}

pub fn qmat_from_json(v: &Value, ctx: &str) -> Result<QMat> {
    let m = obj(v, ctx)?;
    let rows = usize_field(m, "rows", ctx)?;
    let cols = usize_field(m, "cols", ctx)?;
    let data = arr_field(m, "data", ctx)?;
    if data.len() != rows {
        return Err(Error::Schema(format!("{ctx}: expected {rows} rows, found {}", data.len())));
    }
    let mut out = QMat::zero(rows, cols);
    for (i, row) in data.iter().enumerate() {
        let row = row
            .as_array()
            .ok_or_else(|| Error::Schema(format!("{ctx}: row {i} must be an array")))?;
        if row.len() != cols {
            return Err(Error::Schema(format!(
                "{ctx}: row {i} has {} entries, expected {cols}",
                row.len()
            )));
        }
        for (j, entry) in row.iter().enumerate() {
            let s = entry.as_str().ok_or_else(|| {
                Error::Schema(format!("{ctx}: entry ({i},{j}) must be a rational string"))
            })?;
            let q = parse_q(s)
                .map_err(|_| Error::Schema(format!("{ctx}: bad rational {s:?} at ({i},{j})")))?;
            out.set(i, j, q);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// category.json

pub fn category_to_json(cat: &StructureCategory) -> Value {
    let mut fields = Map::new();
    fields.insert("name".to_string(), Value::String(cat.name.clone()));
    fields.insert(
        "flags".to_string(),
        json!({
            "is_groupoid": cat.flags.is_groupoid,
            "has_sum": cat.flags.has_sum,
            "has_tensor": cat.flags.has_tensor,
        }),
    );
    match &cat.kind {
        CatKind::Finite { objects, morphisms } => {
            let mors: Vec<Value> = morphisms
                .iter()
                .map(|f| {
                    json!({
                        "src": f.src().dim,
                        "dst": f.dst().dim,
                        "matrix": qmat_to_json(&f.matrix),
                    })
                })
                .collect();
            fields.insert(
                "finite".to_string(),
                json!({
                    "objects": objects.iter().copied().collect::<Vec<_>>(),
                    "morphisms": mors,
                }),
            );
        }
        CatKind::Open(rule) => {
            let (name, max_dim) = match rule {
                OpenRule::GeneralLinear { max_dim } => ("general_linear", *max_dim),
                OpenRule::AllMatrices { max_dim } => ("all_matrices", *max_dim),
            };
            fields.insert("open".to_string(), json!({ "rule": name, "max_dim": max_dim }));
        }
    }
    document("category", fields)
}

/// Accepts either a full category document or a builtin name string such
/// as `"signed_perm(2)"`.
pub fn category_from_json(v: &Value) -> Result<StructureCategory> {
    if let Some(name) = v.as_str() {
        return StructureCategory::builtin(name);
    }
    let m = expect_document(v, "category")?;
    let name = str_field(m, "name", "category")?;
    let flags_m = obj_field(m, "flags", "category")?;
    let flags = CatFlags {
        is_groupoid: bool_field(flags_m, "is_groupoid", "category flags")?,
        has_sum: bool_field(flags_m, "has_sum", "category flags")?,
        has_tensor: bool_field(flags_m, "has_tensor", "category flags")?,
    };
    match (m.get("finite"), m.get("open")) {
        (Some(fin), None) => {
            let fin = obj(fin, "category finite block")?;
            let objects: BTreeSet<usize> = arr_field(fin, "objects", "category objects")?
                .iter()
                .map(|x| {
                    x.as_u64().map(|n| n as usize).ok_or_else(|| {
                        Error::Schema("category objects must be nonnegative integers".to_string())
                    })
                })
                .collect::<Result<_>>()?;
            let mut morphisms = Vec::new();
            for (k, mv) in arr_field(fin, "morphisms", "category morphisms")?.iter().enumerate() {
                let ctx = format!("category morphism {k}");
                let mm = obj(mv, &ctx)?;
                let src = usize_field(mm, "src", &ctx)?;
                let dst = usize_field(mm, "dst", &ctx)?;
                let matrix = qmat_from_json(field(mm, "matrix", &ctx)?, &ctx)?;
                if matrix.cols() != src || matrix.rows() != dst {
                    return Err(Error::Schema(format!(
                        "{ctx}: a {src} -> {dst} morphism needs a {dst} x {src} matrix, found {} x {}",
                        matrix.rows(),
                        matrix.cols()
                    )));
                }
                morphisms.push(Mor::new(matrix));
            }
            Ok(StructureCategory::finite(name, objects, morphisms, flags))
        }
        (None, Some(open)) => {
            let open = obj(open, "category open block")?;
            let max_dim = usize_field(open, "max_dim", "category open rule")?;
            let rule = match str_field(open, "rule", "category open rule")? {
                "general_linear" => OpenRule::GeneralLinear { max_dim },
                "all_matrices" => OpenRule::AllMatrices { max_dim },
                other => {
                    return Err(Error::Schema(format!("unknown open category rule {other:?}")))
                }
            };
            Ok(StructureCategory { name: name.to_string(), flags, kind: CatKind::Open(rule) })
        }
        _ => Err(Error::Schema(
            "category needs exactly one of the \"finite\" or \"open\" blocks".to_string(),
        )),
    }
}

// ---------------------------------------------------------------------------
// complex and map documents

fn step_to_json(s: &Step) -> Value {
    json!({ "edge": s.edge, "dir": if s.reverse { "rev" } else { "fwd" } })
}

fn step_from_json(v: &Value, ctx: &str) -> Result<Step> {
    let m = obj(v, ctx)?;
    let edge = str_field(m, "edge", ctx)?;
    let reverse = match str_field(m, "dir", ctx)? {
        "fwd" => false,
        "rev" => true,
        other => return Err(Error::Schema(format!("{ctx}: bad direction {other:?}"))),
    };
    Ok(Step { edge: edge.to_string(), reverse })
}

pub fn complex_to_json(c: &CellComplex) -> Value {
    let mut cells = Map::new();
    for (id, cell) in &c.cells {
        let boundary = match &cell.boundary {
            Boundary::Vertex => json!({ "type": "vertex" }),
            Boundary::Edge { from, to } => json!({ "type": "edge", "from": from, "to": to }),
            Boundary::Face { walk } => json!({
                "type": "face",
                "walk": walk.iter().map(step_to_json).collect::<Vec<_>>(),
            }),
            Boundary::Facets { facets } => json!({
                "type": "solid",
                "facets": facets.iter().cloned().collect::<Vec<_>>(),
            }),
        };
        let mut entry = Map::new();
        entry.insert("dim".to_string(), json!(cell.dim));
        entry.insert("boundary".to_string(), boundary);
        if let Some(s) = cell.stratum {
            entry.insert("stratum".to_string(), json!(s));
        }
        cells.insert(id.clone(), Value::Object(entry));
    }
    let mut fields = Map::new();
    fields.insert("cells".to_string(), Value::Object(cells));
    document("complex", fields)
}

pub fn complex_from_json(v: &Value) -> Result<CellComplex> {
    let m = expect_document(v, "complex")?;
    let cells_m = obj_field(m, "cells", "complex")?;
    let mut cells = BTreeMap::new();
    for (id, cv) in cells_m {
        let ctx = format!("cell {id:?}");
        let cm = obj(cv, &ctx)?;
        let dim = usize_field(cm, "dim", &ctx)?;
        let bm = obj_field(cm, "boundary", &ctx)?;
        let boundary = match str_field(bm, "type", &ctx)? {
            "vertex" => Boundary::Vertex,
            "edge" => Boundary::Edge {
                from: str_field(bm, "from", &ctx)?.to_string(),
                to: str_field(bm, "to", &ctx)?.to_string(),
            },
            "face" => Boundary::Face {
                walk: arr_field(bm, "walk", &ctx)?
                    .iter()
                    .map(|s| step_from_json(s, &ctx))
                    .collect::<Result<_>>()?,
            },
            "solid" => Boundary::Facets {
                facets: arr_field(bm, "facets", &ctx)?
                    .iter()
                    .map(|f| {
                        f.as_str().map(str::to_string).ok_or_else(|| {
                            Error::Schema(format!("{ctx}: facet ids must be strings"))
                        })
                    })
                    .collect::<Result<_>>()?,
            },
            other => return Err(Error::Schema(format!("{ctx}: unknown boundary type {other:?}"))),
        };
        let stratum = match cm.get("stratum") {
            None => None,
            Some(s) => Some(s.as_u64().map(|n| n as usize).ok_or_else(|| {
                Error::Schema(format!("{ctx}: stratum must be a nonnegative integer"))
            })?),
        };
        cells.insert(id.clone(), Cell { dim, boundary, stratum });
    }
    let complex = CellComplex { cells };
    complex.validate_complex().into_result()?;
    Ok(complex)
}

pub fn map_to_json(f: &CellularMap) -> Value {
    let mut fields = Map::new();
    fields.insert("src".to_string(), complex_to_json(&f.src));
    fields.insert("dst".to_string(), complex_to_json(&f.dst));
    fields.insert(
        "cell_images".to_string(),
        Value::Object(f.cell_images.iter().map(|(k, v)| (k.clone(), json!(v))).collect()),
    );
    fields.insert(
        "edge_paths".to_string(),
        Value::Object(
            f.edge_paths
                .iter()
                .map(|(k, path)| {
                    (k.clone(), Value::Array(path.iter().map(step_to_json).collect()))
                })
                .collect(),
        ),
    );
    document("map", fields)
}

pub fn map_from_json(v: &Value) -> Result<CellularMap> {
    let m = expect_document(v, "map")?;
    let src = complex_from_json(field(m, "src", "map")?)?;
    let dst = complex_from_json(field(m, "dst", "map")?)?;
    let mut cell_images = BTreeMap::new();
    for (k, iv) in obj_field(m, "cell_images", "map")? {
        let img = iv
            .as_str()
            .ok_or_else(|| Error::Schema(format!("map image of {k:?} must be a cell id")))?;
        cell_images.insert(k.clone(), img.to_string());
    }
    let mut edge_paths = BTreeMap::new();
    for (k, pv) in obj_field(m, "edge_paths", "map")? {
        let ctx = format!("edge path of {k:?}");
        let path = pv
            .as_array()
            .ok_or_else(|| Error::Schema(format!("{ctx} must be an array")))?
            .iter()
            .map(|s| step_from_json(s, &ctx))
            .collect::<Result<_>>()?;
        edge_paths.insert(k.clone(), path);
    }
    Ok(CellularMap { src, dst, cell_images, edge_paths })
}

// ---------------------------------------------------------------------------
// space.json

pub fn space_to_json(s: &StratifiedSpace) -> Value {
    let layers: Vec<Value> = s
        .layers
        .iter()
        .map(|layer| {
            json!({
                "m": complex_to_json(&layer.m),
                "a": layer.a.iter().cloned().collect::<Vec<_>>(),
                "h": map_to_json(&layer.h),
            })
        })
        .collect();
    let mut fields = Map::new();
    fields.insert("base0".to_string(), complex_to_json(&s.base0));
    fields.insert("layers".to_string(), Value::Array(layers));
    document("space", fields)
}

pub fn space_from_json(v: &Value) -> Result<StratifiedSpace> {
    let m = expect_document(v, "space")?;
    let base0 = complex_from_json(field(m, "base0", "space base0")?)?;
    let mut layers = Vec::new();
    for (i, lv) in arr_field(m, "layers", "space")?.iter().enumerate() {
        let ctx = format!("space layer {i}");
        let lm = obj(lv, &ctx)?;
        let mcx = complex_from_json(field(lm, "m", &ctx)?)?;
        let a: BTreeSet<CellId> = arr_field(lm, "a", &ctx)?
            .iter()
            .map(|x| {
                x.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| Error::Schema(format!("{ctx}: attached ids must be strings")))
            })
            .collect::<Result<_>>()?;
        let h = map_from_json(field(lm, "h", &ctx)?)?;
        layers.push(Layer { m: mcx, a, h });
    }
    Ok(StratifiedSpace { base0, layers })
}

// ---------------------------------------------------------------------------
// bundle.json

pub fn bundle_to_json(b: &VBundle) -> Value {
    let mut fields = Map::new();
    fields.insert("base".to_string(), complex_to_json(&b.base));
    fields.insert("category".to_string(), category_to_json(&b.category));
    fields.insert(
        "fiber".to_string(),
        Value::Object(b.fiber.iter().map(|(k, o)| (k.clone(), json!(o.dim))).collect()),
    );
    fields.insert(
        "labels".to_string(),
        Value::Object(b.labels.iter().map(|(k, f)| (k.clone(), qmat_to_json(&f.matrix))).collect()),
    );
    document("bundle", fields)
}

pub fn bundle_from_json(v: &Value) -> Result<VBundle> {
    let m = expect_document(v, "bundle")?;
    let base = complex_from_json(field(m, "base", "bundle base")?)?;
    let category = Arc::new(category_from_json(field(m, "category", "bundle category")?)?);
    let mut fiber = BTreeMap::new();
    for (k, dv) in obj_field(m, "fiber", "bundle")? {
        let dim = dv.as_u64().ok_or_else(|| {
            Error::Schema(format!("bundle fiber at {k:?} must be a nonnegative integer"))
        })?;
        fiber.insert(k.clone(), Obj::new(dim as usize));
    }
    let mut labels = BTreeMap::new();
    for (k, lv) in obj_field(m, "labels", "bundle")? {
        let ctx = format!("bundle label {k:?}");
        labels.insert(k.clone(), Mor::new(qmat_from_json(lv, &ctx)?));
    }
    let bundle = VBundle { base, category, fiber, labels };
    crate::bundle::validate_bundle(&bundle).into_result()?;
    Ok(bundle)
}

// ---------------------------------------------------------------------------
// stratified_bundle.json

pub fn stratified_to_json(x: &StratifiedBundle) -> Value {
    let layers: Vec<Value> = x
        .layers
        .iter()
        .map(|(m, attach)| {
            json!({
                "bundle": bundle_to_json(m),
                "attach": {
                    "base_map": map_to_json(&attach.base_map),
                    "fiber_maps": Value::Object(
                        attach
                            .fiber_maps
                            .iter()
                            .map(|(k, f)| (k.clone(), qmat_to_json(&f.matrix)))
                            .collect(),
                    ),
                },
            })
        })
        .collect();
    let mut fields = Map::new();
    fields.insert("space".to_string(), space_to_json(&x.space));
    fields.insert("layer0".to_string(), bundle_to_json(&x.layer0));
    fields.insert("layers".to_string(), Value::Array(layers));
    document("stratified_bundle", fields)
}

pub fn stratified_from_json(v: &Value) -> Result<StratifiedBundle> {
    let m = expect_document(v, "stratified_bundle")?;
    let space = space_from_json(field(m, "space", "stratified bundle")?)?;
    let layer0 = bundle_from_json(field(m, "layer0", "stratified bundle")?)?;
    let layer_docs = arr_field(m, "layers", "stratified bundle")?;
    if layer_docs.len() != space.layers.len() {
        return Err(Error::Schema(format!(
            "stratified bundle lists {} layers but its space has {}",
            layer_docs.len(),
            space.layers.len()
        )));
    }
    let mut layers = Vec::new();
    for (i, lv) in layer_docs.iter().enumerate() {
        let ctx = format!("stratified layer {i}");
        let lm = obj(lv, &ctx)?;
        let bundle = bundle_from_json(field(lm, "bundle", &ctx)?)?;
        let am = obj_field(lm, "attach", &ctx)?;
        let base_map = map_from_json(field(am, "base_map", &ctx)?)?;
        let mut fiber_maps = BTreeMap::new();
        for (k, fv) in obj_field(am, "fiber_maps", &ctx)? {
            let fctx = format!("{ctx} fiber map at {k:?}");
            fiber_maps.insert(k.clone(), Mor::new(qmat_from_json(fv, &fctx)?));
        }
        let attach = AttachingVMap::new(&bundle, &space.layers[i].a, base_map, fiber_maps)?;
        layers.push((bundle, attach));
    }
    crate::strata::build_stratified(space, layer0, layers)
}

// ---------------------------------------------------------------------------
// polytope.json

pub fn polytope_to_json(p: &PolytopalManifold) -> Value {
    let coords: Map<String, Value> = p
        .coords
        .iter()
        .map(|(k, xs)| {
            (k.clone(), Value::Array(xs.iter().map(|q| Value::String(format_q(q))).collect()))
        })
        .collect();
    let cells: Map<String, Value> = p
        .cells
        .iter()
        .map(|(k, c)| {
            (
                k.clone(),
                json!({
                    "dim": c.dim,
                    "level": c.level,
                    "vertices": c.vertices,
                    "basis": qmat_to_json(&c.basis),
                }),
            )
        })
        .collect();
    let mut fields = Map::new();
    fields.insert("ambient_dim".to_string(), json!(p.ambient_dim));
    fields.insert("coords".to_string(), Value::Object(coords));
    fields.insert("cells".to_string(), Value::Object(cells));
    document("polytope", fields)
}

pub fn polytope_from_json(v: &Value) -> Result<PolytopalManifold> {
    let m = expect_document(v, "polytope")?;
    let ambient_dim = usize_field(m, "ambient_dim", "polytope")?;
    let mut coords = BTreeMap::new();
    for (k, cv) in obj_field(m, "coords", "polytope")? {
        let ctx = format!("coordinates of {k:?}");
        let xs = cv
            .as_array()
            .ok_or_else(|| Error::Schema(format!("{ctx} must be an array")))?
            .iter()
            .map(|x| {
                let s = x
                    .as_str()
                    .ok_or_else(|| Error::Schema(format!("{ctx}: entries must be strings")))?;
                parse_q(s).map_err(|_| Error::Schema(format!("{ctx}: bad rational {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        coords.insert(k.clone(), xs);
    }
    let mut cells = BTreeMap::new();
    for (k, cv) in obj_field(m, "cells", "polytope")? {
        let ctx = format!("polytope cell {k:?}");
        let cm = obj(cv, &ctx)?;
        let vertices: Vec<CellId> = arr_field(cm, "vertices", &ctx)?
            .iter()
            .map(|x| {
                x.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| Error::Schema(format!("{ctx}: vertex ids must be strings")))
            })
            .collect::<Result<_>>()?;
        cells.insert(
            k.clone(),
            PolyCell {
                dim: usize_field(cm, "dim", &ctx)?,
                vertices,
                level: usize_field(cm, "level", &ctx)?,
                basis: qmat_from_json(field(cm, "basis", &ctx)?, &ctx)?,
            },
        );
    }
    let p = PolytopalManifold { ambient_dim, coords, cells };
    p.validate().into_result()?;
    Ok(p)
}

// ---------------------------------------------------------------------------
// reports

pub fn report_to_json(r: &ValidationReport) -> Value {
    let mut fields = Map::new();
    fields.insert("subject".to_string(), json!(r.subject));
    fields.insert("valid".to_string(), json!(r.is_valid()));
    fields.insert(
        "violations".to_string(),
        Value::Array(
            r.violations
                .iter()
                .map(|v| json!({ "rule": v.rule, "detail": v.detail }))
                .collect(),
        ),
    );
    document("report", fields)
}

fn zmat_rows_to_json(a: &ZMat) -> Value {
    Value::Array(
        (0..a.rows())
            .map(|i| {
                Value::Array(
                    (0..a.cols()).map(|j| Value::String(a.at(i, j).to_string())).collect(),
                )
            })
            .collect(),
    )
}

/// Report for the `k0` verb: generators, relation rows, presentation, the
/// class map, the addition table, and the window the answer is valid for.
pub fn k0_to_json(k: &KGroup) -> Value {
    let generators: Vec<Value> = k
        .generators
        .iter()
        .map(|&cls| {
            json!({
                "class": cls,
                "stratum_dims": k.monoid.classes[cls]
                    .stratum_fiber_dims()
                    .iter()
                    .map(|dims| dims.iter().copied().collect::<Vec<_>>())
                    .collect::<Vec<_>>(),
            })
        })
        .collect();
    let mut class_map = Map::new();
    for idx in 0..k.monoid.classes.len() {
        let el = k.class_map(idx).expect("class indices are in range");
        class_map.insert(
            idx.to_string(),
            json!({
                "torsion": el.torsion.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
                "free": el.free.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
            }),
        );
    }
    let mut add_table = Map::new();
    for (&(i, j), entry) in &k.monoid.add_table {
        let val = match entry {
            SumEntry::Class(c) => json!({ "class": c }),
            SumEntry::OutsideWindow => json!("outside_window"),
            SumEntry::Unknown => json!("unknown"),
        };
        add_table.insert(format!("{i}+{j}"), val);
    }
    let mut fields = Map::new();
    fields.insert("category".to_string(), json!(k.monoid.category.name));
    fields.insert("class_count".to_string(), json!(k.monoid.classes.len()));
    fields.insert("generators".to_string(), Value::Array(generators));
    fields.insert("relations".to_string(), zmat_rows_to_json(&k.relations));
    fields.insert(
        "divisors".to_string(),
        Value::Array(k.divisors.iter().map(|d| Value::String(d.to_string())).collect()),
    );
    fields.insert("free_rank".to_string(), json!(k.free_rank));
    fields.insert("presentation".to_string(), json!(k.presentation));
    fields.insert("class_map".to_string(), Value::Object(class_map));
    fields.insert("add_table".to_string(), Value::Object(add_table));
    fields.insert("window".to_string(), json!(k.window));
    fields.insert("partial".to_string(), json!(k.monoid.partial));
    document("k0_report", fields)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{circle_self_map, disc_space, flap_manifold, mobius_bundle};
    use crate::ktheory::{enumerate_classes, grothendieck};
    use crate::tangent::build_tangent;

    fn round_trip(v: &Value) -> Value {
        parse_str(&to_pretty_string(v)).unwrap()
    }

    #[test]
    fn category_documents_round_trip_byte_identically() {
        for cat in [
            StructureCategory::signed_perm(2),
            StructureCategory::trivial(),
            StructureCategory::gl_open(3),
            StructureCategory::vect_open(4),
        ] {
            let doc = category_to_json(&cat);
            let text = to_pretty_string(&doc);
            let back = category_from_json(&round_trip(&doc)).unwrap();
            assert_eq!(back, cat);
            assert_eq!(to_pretty_string(&category_to_json(&back)), text);
        }
    }

    #[test]
    fn builtin_category_names_are_accepted() {
        let cat = category_from_json(&Value::String("signed_perm(1)".to_string())).unwrap();
        assert_eq!(cat, StructureCategory::signed_perm(1));
    }

    #[test]
    fn unknown_schema_versions_are_rejected() {
        let mut doc = category_to_json(&StructureCategory::trivial());
        doc["schema"] = json!("stratk-0");
        let err = category_from_json(&doc).unwrap_err();
        assert!(matches!(err, Error::Schema(_)), "got {err:?}");
    }

    #[test]
    fn space_and_map_documents_round_trip() {
        let space = disc_space();
        let back = space_from_json(&round_trip(&space_to_json(&space))).unwrap();
        assert_eq!(back, space);
        let f = circle_self_map(2);
        let back = map_from_json(&round_trip(&map_to_json(&f))).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn assembled_stratum_tags_survive_the_trip() {
        let asm = crate::complex::assemble(&disc_space()).unwrap();
        let back = complex_from_json(&round_trip(&complex_to_json(&asm.total))).unwrap();
        assert_eq!(back, asm.total);
        assert!(back.cells.values().all(|c| c.stratum.is_some()));
    }

    #[test]
    fn bundle_documents_round_trip() {
        let b = mobius_bundle();
        let back = bundle_from_json(&round_trip(&bundle_to_json(&b))).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn stratified_bundle_documents_round_trip() {
        let x = build_tangent(&flap_manifold()).unwrap();
        let doc = stratified_to_json(&x);
        let text = to_pretty_string(&doc);
        let back = stratified_from_json(&round_trip(&doc)).unwrap();
        assert_eq!(back, x);
        assert_eq!(to_pretty_string(&stratified_to_json(&back)), text);
    }

    #[test]
    fn polytope_documents_round_trip() {
        let p = flap_manifold();
        let back = polytope_from_json(&round_trip(&polytope_to_json(&p))).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn bad_rationals_name_the_offending_entry() {
        let mut doc = polytope_to_json(&flap_manifold());
        doc["coords"]["a"][0] = json!("1/0");
        let err = polytope_from_json(&doc).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("\"a\""), "error should name the cell: {msg}");
    }

    #[test]
    fn k0_report_carries_presentation_and_window() {
        let space = crate::complex::StratifiedSpace::base_only(crate::fixtures::circle());
        let monoid =
            enumerate_classes(&space, Arc::new(StructureCategory::signed_perm(1)), 2).unwrap();
        let k = grothendieck(monoid).unwrap();
        let doc = k0_to_json(&k);
        assert_eq!(doc["presentation"], json!("Z^2"));
        assert_eq!(doc["window"], json!(2));
        assert_eq!(doc["class_count"], json!(6));
        assert_eq!(doc["partial"], json!(false));
        // Normalized emission is idempotent.
        assert_eq!(to_pretty_string(&round_trip(&doc)), to_pretty_string(&doc));
    }
}
