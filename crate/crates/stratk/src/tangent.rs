//! Stratified tangent families of polytopal manifolds.
//!
//! A polytopal manifold here is a finite cell complex embedded in rational
//! affine space and stratified by levels. Every cell carries the direction
//! space of its affine hull as an explicit rational basis matrix. The
//! tangent family gives stratum level `i` the trivial bundle whose rank is
//! the stratum dimension; over lower strata it attaches by the linear part
//! of the attaching map composed with a projection onto the lower direction
//! space. Those attach maps are surjective but usually not invertible, which
//! is exactly what keeps a tangent family from flattening to an ordinary
//! bundle.

use crate::bundle::{IsoOutcome, VBundle};
use crate::complex::{
    assemble, CellComplex, CellId, CellularMap, Layer, Step, StratifiedSpace,
};
use crate::error::{Error, Result};
use crate::lincat::{Mor, Obj, StructureCategory};
use crate::matrix::{qi, Q, QMat};
use crate::report::ValidationReport;
use crate::strata::{
    build_stratified, is_isomorphic_stratified, AttachingVMap, StratifiedBundle, StratifiedGauge,
};
use num_traits::Zero;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

/// One cell of a polytopal manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyCell {
    /// Geometric dimension of the carrier.
    pub dim: usize,
    /// Vertex ids of the carrier: the id itself for a 0-cell, the ordered
    /// endpoints of an edge, the cyclic boundary order of a polygon, the
    /// full vertex set of a higher cell.
    pub vertices: Vec<CellId>,
    /// Stratum the open cell belongs to.
    pub level: usize,
    /// Basis of the direction space of the affine hull, `ambient_dim` rows
    /// and one column per cell dimension.
    pub basis: QMat,
}

/// A finite polytopal complex with rational vertex coordinates and a
/// stratification by levels.
#[derive(Debug, Clone, PartialEq)]
pub struct PolytopalManifold {
    pub ambient_dim: usize,
    /// Coordinates of each vertex, `ambient_dim` entries per vertex.
    pub coords: BTreeMap<CellId, Vec<Q>>,
    pub cells: BTreeMap<CellId, PolyCell>,
}

impl PolytopalManifold {
    fn vertex_set(&self, id: &str) -> BTreeSet<&CellId> {
        self.cells[id].vertices.iter().collect()
    }

    /// Proper faces of a cell, read off from strict vertex-set inclusion.
    /// Cells of a polytopal complex are determined by their vertex sets.
    pub fn faces_of(&self, id: &str) -> Vec<CellId> {
        let outer = self.vertex_set(id);
        self.cells
            .keys()
            .filter(|f| f.as_str() != id && self.vertex_set(f).is_subset(&outer))
            .cloned()
            .collect()
    }

    pub fn max_level(&self) -> usize {
        self.cells.values().map(|c| c.level).max().unwrap_or(0)
    }

    /// Cells of the given level not properly contained in another cell of
    /// the same level. Each one contributes a closure copy to its layer.
    pub fn maximal_of_level(&self, level: usize) -> Vec<CellId> {
        self.cells
            .iter()
            .filter(|(_, c)| c.level == level)
            .filter(|(id, _)| {
                !self.cells.iter().any(|(other, oc)| {
                    oc.level == level
                        && other.as_str() != id.as_str()
                        && self.vertex_set(id).is_subset(&self.vertex_set(other))
                })
            })
            .map(|(id, _)| id.clone())
            .collect()
    }

    /// The maximal cell of the same level that carries this cell, or the
    /// cell itself when it is maximal.
    pub fn owner_of(&self, id: &str) -> Result<CellId> {
        let level = self.cells[id].level;
        let owners: Vec<CellId> = self
            .maximal_of_level(level)
            .into_iter()
            .filter(|m| m.as_str() == id || self.vertex_set(id).is_subset(&self.vertex_set(m)))
            .collect();
        match owners.len() {
            1 => Ok(owners.into_iter().next().unwrap()),
            0 => Err(Error::Invalid(format!("cell {id:?} has no maximal cell of its level"))),
            _ => Err(Error::Invalid(format!(
                "cell {id:?} sits in {} maximal cells of its own level",
                owners.len()
            ))),
        }
    }

    fn edge_between(&self, u: &str, v: &str) -> Result<CellId> {
        let want: BTreeSet<&str> = [u, v].into_iter().collect();
        let hits: Vec<&CellId> = self
            .cells
            .iter()
            .filter(|(_, c)| c.dim == 1)
            .filter(|(_, c)| c.vertices.iter().map(|s| s.as_str()).collect::<BTreeSet<_>>() == want)
            .map(|(id, _)| id)
            .collect();
        match hits.len() {
            1 => Ok(hits[0].clone()),
            0 => Err(Error::Invalid(format!("no edge cell joins {u:?} and {v:?}"))),
            _ => Err(Error::Invalid(format!("several edge cells join {u:?} and {v:?}"))),
        }
    }

    fn coord_vec(&self, v: &str) -> Result<QMat> {
        let c = self
            .coords
            .get(v)
            .ok_or_else(|| Error::Invalid(format!("no coordinates for vertex {v:?}")))?;
        Ok(QMat::col_vec(c))
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::new("polytopal manifold");
        for id in self.cells.keys().chain(self.coords.keys()) {
            if id.contains('@') {
                report.push("cell-id", format!("id {id:?} contains the reserved character '@'"));
            }
        }
        for (v, c) in &self.coords {
            if c.len() != self.ambient_dim {
                report.push(
                    "coords-shape",
                    format!("vertex {v:?} has {} coordinates, ambient is {}", c.len(), self.ambient_dim),
                );
            }
            match self.cells.get(v) {
                Some(cell) if cell.dim == 0 => {}
                _ => report.push("vertex-cell", format!("vertex {v:?} has no 0-cell entry")),
            }
        }
        let mut seen_sets: BTreeMap<Vec<&CellId>, &CellId> = BTreeMap::new();
        for (id, cell) in &self.cells {
            let vset = self.vertex_set(id);
            let key: Vec<&CellId> = vset.iter().copied().collect();
            if let Some(prev) = seen_sets.insert(key, id) {
                report.push(
                    "carrier-overlap",
                    format!("cells {prev:?} and {id:?} share the same vertex set"),
                );
                continue;
            }
            for v in &cell.vertices {
                if !self.coords.contains_key(v) {
                    report.push("coords-missing", format!("cell {id:?} uses unknown vertex {v:?}"));
                }
            }
            if cell.vertices.iter().collect::<BTreeSet<_>>().len() != cell.vertices.len() {
                report.push("carrier-vertices", format!("cell {id:?} repeats a vertex"));
            }
            match cell.dim {
                0 => {
                    if cell.vertices.as_slice() != [id.clone()] {
                        report.push(
                            "carrier-vertices",
                            format!("0-cell {id:?} must list exactly itself"),
                        );
                    }
                }
                1 => {
                    if cell.vertices.len() != 2 {
                        report.push("carrier-vertices", format!("edge {id:?} needs two endpoints"));
                    }
                }
                2 => {
                    if cell.vertices.len() < 3 {
                        report.push(
                            "carrier-vertices",
                            format!("polygon {id:?} needs at least three vertices"),
                        );
                    } else {
                        let n = cell.vertices.len();
                        for j in 0..n {
                            let u = &cell.vertices[j];
                            let w = &cell.vertices[(j + 1) % n];
                            if let Err(e) = self.edge_between(u, w) {
                                report.push("polygon-boundary", format!("{id:?}: {e}"));
                            }
                        }
                    }
                }
                d => {
                    if cell.vertices.len() < d + 1 {
                        report.push(
                            "carrier-vertices",
                            format!("{d}-cell {id:?} needs at least {} vertices", d + 1),
                        );
                    }
                    let facets = self
                        .cells
                        .iter()
                        .filter(|(f, fc)| {
                            fc.dim == d - 1 && self.vertex_set(f).is_subset(&self.vertex_set(id))
                        })
                        .count();
                    if facets == 0 {
                        report.push("facets", format!("{d}-cell {id:?} has no facet cells"));
                    }
                }
            }
            if cell.basis.rows() != self.ambient_dim || cell.basis.cols() != cell.dim {
                report.push(
                    "direction-shape",
                    format!(
                        "cell {id:?} direction basis is {}x{}, expected {}x{}",
                        cell.basis.rows(),
                        cell.basis.cols(),
                        self.ambient_dim,
                        cell.dim
                    ),
                );
                continue;
            }
            if cell.basis.rank() != cell.dim {
                report.push(
                    "direction-rank",
                    format!("cell {id:?} direction basis has rank below {}", cell.dim),
                );
                continue;
            }
            // The direction space must be the affine hull of the carrier:
            // vertex differences lie in it and already span it.
            if cell.vertices.iter().all(|v| self.coords.contains_key(v)) && !cell.vertices.is_empty()
            {
                let p0 = self.coord_vec(&cell.vertices[0]).unwrap();
                let mut diff_cols: Vec<QMat> = Vec::new();
                for v in &cell.vertices[1..] {
                    diff_cols.push(self.coord_vec(v).unwrap().sub(&p0).unwrap());
                }
                let mut stacked = cell.basis.clone();
                let mut diff_rank_probe = QMat::zero(self.ambient_dim, 0);
                for d in &diff_cols {
                    stacked = hstack(&stacked, d);
                    diff_rank_probe = hstack(&diff_rank_probe, d);
                }
                if stacked.rank() != cell.dim {
                    report.push(
                        "affine-hull",
                        format!("cell {id:?}: a vertex leaves the declared direction space"),
                    );
                }
                if diff_rank_probe.rank() != cell.dim {
                    report.push(
                        "affine-hull",
                        format!("cell {id:?}: carrier vertices span rank {} only", diff_rank_probe.rank()),
                    );
                }
            }
        }
        // Face relations: levels are monotone, dimensions strict, direction
        // spaces nested.
        for (f, fc) in &self.cells {
            for (c, cc) in &self.cells {
                if f == c || !self.vertex_set(f).is_subset(&self.vertex_set(c)) {
                    continue;
                }
                if fc.dim >= cc.dim {
                    report.push(
                        "face-dimension",
                        format!("face {f:?} of {c:?} does not drop dimension"),
                    );
                }
                if fc.level > cc.level {
                    report.push("face-level", format!("face {f:?} outranks its coface {c:?}"));
                }
                if fc.basis.rows() == cc.basis.rows() && cc.basis.cols() == cc.dim {
                    let mut stacked = cc.basis.clone();
                    for j in 0..fc.basis.cols() {
                        stacked = hstack(&stacked, &QMat::col_vec(&fc.basis.col(j)));
                    }
                    if stacked.rank() != cc.dim {
                        report.push(
                            "direction-nesting",
                            format!("direction space of {f:?} leaves its coface {c:?}"),
                        );
                    }
                }
            }
        }
        if !self.cells.is_empty() && !self.cells.values().any(|c| c.level == 0) {
            report.push("stratification", "no cell has level 0".to_string());
        }
        for (id, cell) in &self.cells {
            if cell.level >= 1 {
                if let Err(e) = self.owner_of(id) {
                    report.push("stratification", e.to_string());
                }
            }
        }
        report
    }
}

fn hstack(a: &QMat, b: &QMat) -> QMat {
    debug_assert_eq!(a.rows(), b.rows());
    let mut entries = Vec::with_capacity(a.rows() * (a.cols() + b.cols()));
    for i in 0..a.rows() {
        entries.extend(a.row(i).iter().cloned());
        entries.extend(b.row(i).iter().cloned());
    }
    QMat::new(a.rows(), a.cols() + b.cols(), entries)
}

fn copy_id(f: &str, c: &str) -> CellId {
    format!("{f}@{c}")
}

/// Maximal cell whose closure copy a renamed cell belongs to.
fn copy_owner(id: &str) -> Result<CellId> {
    id.rsplit_once('@')
        .map(|(_, c)| c.to_string())
        .ok_or_else(|| Error::Invalid(format!("cell {id:?} is not a closure copy")))
}

/// Builds the cell complex on the listed cells, with ids passed through the
/// renamer. Polygons get their boundary walks from the cyclic vertex order;
/// higher cells list their facets.
fn build_complex(
    p: &PolytopalManifold,
    ids: &BTreeSet<CellId>,
    rename: &dyn Fn(&str) -> CellId,
) -> Result<CellComplex> {
    let mut cx = CellComplex::new();
    for id in ids {
        let cell = &p.cells[id];
        match cell.dim {
            0 => {
                cx.add_vertex(rename(id));
            }
            1 => {
                cx.add_edge(rename(id), rename(&cell.vertices[0]), rename(&cell.vertices[1]));
            }
            2 => {
                let n = cell.vertices.len();
                let mut walk = Vec::with_capacity(n);
                for j in 0..n {
                    let u = &cell.vertices[j];
                    let w = &cell.vertices[(j + 1) % n];
                    let e = p.edge_between(u, w)?;
                    if !ids.contains(&e) {
                        return Err(Error::Invalid(format!(
                            "edge {e:?} of polygon {id:?} is missing from its stratum closure"
                        )));
                    }
                    let fwd = p.cells[&e].vertices[0] == *u;
                    walk.push(if fwd { Step::fwd(rename(&e)) } else { Step::rev(rename(&e)) });
                }
                cx.add_face(rename(id), walk);
            }
            d => {
                let facets: BTreeSet<CellId> = ids
                    .iter()
                    .filter(|f| {
                        p.cells[f.as_str()].dim == d - 1
                            && p.vertex_set(f).is_subset(&p.vertex_set(id))
                    })
                    .map(|f| rename(f))
                    .collect();
                cx.add_solid(rename(id), d, facets);
            }
        }
    }
    Ok(cx)
}

/// Component key of the base stratum mapped to the top cell chartering it.
/// Each level-0 component must carry exactly one maximal cell; its direction
/// basis is the chart of the whole piece.
fn base_piece_tops(
    p: &PolytopalManifold,
    base0: &CellComplex,
) -> Result<BTreeMap<CellId, CellId>> {
    let maximal: BTreeSet<CellId> = p.maximal_of_level(0).into_iter().collect();
    let mut tops: BTreeMap<CellId, CellId> = BTreeMap::new();
    for id in self_level0(p) {
        if !maximal.contains(&id) {
            continue;
        }
        let key = base0.component_key_of(&id)?;
        if let Some(prev) = tops.insert(key.clone(), id.clone()) {
            return Err(Error::Invalid(format!(
                "base stratum component {key:?} carries two top cells {prev:?} and {id:?}"
            )));
        }
    }
    for key in base0.components().keys() {
        if !tops.contains_key(key) {
            return Err(Error::Invalid(format!(
                "base stratum component {key:?} has no top cell"
            )));
        }
    }
    Ok(tops)
}

fn self_level0(p: &PolytopalManifold) -> Vec<CellId> {
    p.cells.iter().filter(|(_, c)| c.level == 0).map(|(id, _)| id.clone()).collect()
}

/// Presents the manifold as a stratified space: level 0 keeps its own cell
/// ids; every higher level contributes one disjoint closure copy per maximal
/// cell, renamed `face@cell`, attached along the copies of faces of strictly
/// lower level.
pub fn polytopal_space(p: &PolytopalManifold) -> Result<StratifiedSpace> {
    p.validate().into_result()?;
    let level0: BTreeSet<CellId> = self_level0(p).into_iter().collect();
    if level0.is_empty() {
        return Err(Error::Invalid("polytopal manifold has no level-0 cells".to_string()));
    }
    let base0 = build_complex(p, &level0, &|id| id.to_string())?;
    base0.validate_complex().into_result()?;
    base_piece_tops(p, &base0)?;

    let mut space = StratifiedSpace::base_only(base0);
    let mut asm = assemble(&space)?;
    // Current total-complex id of every original cell whose level is built.
    let mut stage_id: BTreeMap<CellId, CellId> =
        level0.iter().map(|id| (id.clone(), asm.base_to_total[id].clone())).collect();

    for level in 1..=p.max_level() {
        let maximal = p.maximal_of_level(level);
        if maximal.is_empty() {
            return Err(Error::Invalid(format!("stratification level {level} has no cells")));
        }
        let mut m = CellComplex::new();
        let mut attached: BTreeSet<CellId> = BTreeSet::new();
        let mut images: BTreeMap<CellId, CellId> = BTreeMap::new();
        let mut paths: BTreeMap<CellId, Vec<Step>> = BTreeMap::new();
        for c in &maximal {
            let mut members: BTreeSet<CellId> = p.faces_of(c).into_iter().collect();
            members.insert(c.clone());
            let rename = |id: &str| copy_id(id, c);
            let copy = build_complex(p, &members, &rename)?;
            for (id, cell) in copy.cells {
                m.cells.insert(id, cell);
            }
            for f in &members {
                if p.cells[f].level >= level {
                    continue;
                }
                let fid = rename(f);
                attached.insert(fid.clone());
                images.insert(fid.clone(), stage_id[f].clone());
                if p.cells[f].dim == 1 {
                    paths.insert(fid, vec![Step::fwd(stage_id[f].clone())]);
                }
            }
        }
        let h = CellularMap {
            src: m.subcomplex(&attached)?,
            dst: asm.total.clone(),
            cell_images: images,
            edge_paths: paths,
        };
        space.layers.push(Layer { m, a: attached, h });
        asm = assemble(&space)?;
        for (id, cell) in &p.cells {
            if cell.level > level {
                continue;
            }
            let total = if cell.level == 0 {
                asm.base_to_total[id].clone()
            } else {
                let owner = p.owner_of(id)?;
                asm.layer_to_total[cell.level - 1][&copy_id(id, &owner)].clone()
            };
            stage_id.insert(id.clone(), total);
        }
    }
    Ok(space)
}

/// Linear part of the attach followed by projection to the lower direction
/// space: in the chart bases this is `pinv(B_target) . B_source`, using the
/// Euclidean pseudo-inverse of the target basis.
fn projection_attach(b_target: &QMat, b_source: &QMat) -> Result<QMat> {
    if b_target.cols() == 0 {
        return Ok(QMat::zero(0, b_source.cols()));
    }
    let gram = b_target.transpose().mul(b_target)?;
    let inv = gram
        .inverse()
        .ok_or_else(|| Error::Singular("degenerate direction basis".to_string()))?;
    inv.mul(&b_target.transpose())?.mul(b_source)
}

/// Orthogonal projection onto the tangent space of the unit sphere at a
/// nonzero point: `P(x) = I - x x^T / (x . x)`.
pub fn tangent_projection(x: &QMat) -> Result<QMat> {
    if x.cols() != 1 || x.rows() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "point must be a nonempty column vector, got {}x{}",
            x.rows(),
            x.cols()
        )));
    }
    let norm_sq = x.transpose().mul(x)?.at(0, 0).clone();
    if norm_sq.is_zero() {
        return Err(Error::Invalid(
            "tangent projection is undefined at the zero vector".to_string(),
        ));
    }
    let outer = x.mul(&x.transpose())?;
    QMat::identity(x.rows()).sub(&outer.scale(&(qi(1) / norm_sq)))
}

/// The stratified tangent family of a polytopal manifold, with the default
/// orthogonal choice of projections.
pub fn build_tangent(p: &PolytopalManifold) -> Result<StratifiedBundle> {
    build_tangent_with(p, &BTreeMap::new())
}

/// Tangent family with selected attach fiber maps replaced. Overrides are
/// keyed by the copy id of an attached 0-cell; each override must keep the
/// expected shape and stay surjective. Higher attached cells are still
/// checked against the default projection, which pins the geometry.
pub fn build_tangent_with(
    p: &PolytopalManifold,
    overrides: &BTreeMap<CellId, Mor>,
) -> Result<StratifiedBundle> {
    let space = polytopal_space(p)?;
    let asm = assemble(&space)?;
    let top_dim = p.cells.values().map(|c| c.dim).max().unwrap_or(0);
    let category = Arc::new(StructureCategory::vect_open(top_dim));
    let piece_tops = base_piece_tops(p, &space.base0)?;

    let chart_of_total = |total: &str| -> Result<(QMat, usize)> {
        let (stratum, orig) = asm
            .origin
            .get(total)
            .ok_or_else(|| Error::Invalid(format!("no total cell {total:?}")))?;
        let chart_cell = if *stratum == 0 {
            piece_tops[&space.base0.component_key_of(orig)?].clone()
        } else {
            copy_owner(orig)?
        };
        let cell = &p.cells[&chart_cell];
        Ok((cell.basis.clone(), cell.dim))
    };

    let mut fiber = BTreeMap::new();
    for key in space.base0.components().keys() {
        fiber.insert(key.clone(), Obj::new(p.cells[&piece_tops[key]].dim));
    }
    let mut labels = BTreeMap::new();
    for (e, _) in space.base0.cells_of_dim(1) {
        let key = space.base0.component_key_of(e)?;
        labels.insert(e.clone(), Mor::identity(p.cells[&piece_tops[&key]].dim));
    }
    let layer0 = VBundle { base: space.base0.clone(), category: category.clone(), fiber, labels };

    let mut layers = Vec::new();
    for (i, layer) in space.layers.iter().enumerate() {
        let rank_of = |copy_cell: &str| -> Result<usize> {
            Ok(p.cells[&copy_owner(copy_cell)?].dim)
        };
        let mut fiber = BTreeMap::new();
        for key in layer.m.components().keys() {
            fiber.insert(key.clone(), Obj::new(rank_of(key)?));
        }
        let mut labels = BTreeMap::new();
        for (e, _) in layer.m.cells_of_dim(1) {
            labels.insert(e.clone(), Mor::identity(rank_of(e)?));
        }
        let m_bundle =
            VBundle { base: layer.m.clone(), category: category.clone(), fiber, labels };

        let mut fiber_maps = BTreeMap::new();
        for g in &layer.a {
            let total = &asm.layer_to_total[i][g];
            let (b_target, target_dim) = chart_of_total(total)?;
            let b_source = &p.cells[&copy_owner(g)?].basis;
            let derived = projection_attach(&b_target, b_source)?;
            if layer.m.dim_of(g) == Some(0) {
                let chosen = match overrides.get(g) {
                    Some(f) => f.clone(),
                    None => Mor::new(derived.clone()),
                };
                if chosen.matrix.rows() != target_dim || chosen.matrix.cols() != b_source.cols() {
                    return Err(Error::DimensionMismatch(format!(
                        "attach map at {g:?} must be {}x{}, got {}x{}",
                        target_dim,
                        b_source.cols(),
                        chosen.matrix.rows(),
                        chosen.matrix.cols()
                    )));
                }
                if chosen.matrix.rank() != target_dim {
                    return Err(Error::NotSurjective(format!(
                        "attach map at {g:?} is not onto the rank-{target_dim} tangent fiber"
                    )));
                }
                fiber_maps.insert(g.clone(), chosen);
            } else if derived.rank() != target_dim {
                // Higher attached cells induce the same composite on their
                // carriers; the tangent hypothesis needs it surjective too.
                return Err(Error::NotSurjective(format!(
                    "projected attach over cell {g:?} drops onto rank {} of {}",
                    derived.rank(),
                    target_dim
                )));
            }
        }
        let attach = AttachingVMap::new(&m_bundle, &layer.a, layer.h.clone(), fiber_maps)?;
        layers.push((m_bundle, attach));
    }
    build_stratified(space, layer0, layers)
}

/// Report of comparing the default tangent family against one built with an
/// alternative projection family.
#[derive(Debug, Clone)]
pub struct ChoiceReport {
    /// Whether the alternative attach maps literally coincide with the
    /// default ones.
    pub families_agree: bool,
    /// Isomorphism verdict between the two tangent families.
    pub outcome: IsoOutcome<StratifiedGauge>,
}

impl ChoiceReport {
    pub fn isomorphic(&self) -> bool {
        matches!(self.outcome, IsoOutcome::Witness(_))
    }
}

fn identity_gauge(bundle: &VBundle) -> Result<BTreeMap<CellId, Mor>> {
    bundle
        .base
        .cells_of_dim(0)
        .map(|(v, _)| Ok((v.clone(), Mor::identity(bundle.fiber_dim_at(v)?))))
        .collect()
}

/// Builds the tangent family twice, once with the default orthogonal
/// projections and once with the supplied alternatives, and decides whether
/// the results are isomorphic as stratified bundles. An invalid alternative
/// family surfaces as a construction error instead of a verdict.
pub fn choice_independence_check(
    p: &PolytopalManifold,
    alt: &BTreeMap<CellId, Mor>,
) -> Result<ChoiceReport> {
    let default = build_tangent(p)?;
    let other = build_tangent_with(p, alt)?;
    let agree = default
        .layers
        .iter()
        .zip(other.layers.iter())
        .all(|((_, da), (_, oa))| da.fiber_maps == oa.fiber_maps);
    if agree {
        let mut gauges = Vec::new();
        for (m, _) in &default.layers {
            gauges.push(identity_gauge(m)?);
        }
        return Ok(ChoiceReport {
            families_agree: true,
            outcome: IsoOutcome::Witness(StratifiedGauge {
                layer0: identity_gauge(&default.layer0)?,
                layers: gauges,
            }),
        });
    }
    Ok(ChoiceReport { families_agree: false, outcome: is_isomorphic_stratified(&default, &other)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::fixtures::{cube_manifold, flap_manifold, segment_manifold};
    use crate::matrix::q;
    use crate::strata::flatten;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mor(rows: &[&[i64]]) -> Mor {
        Mor::new(QMat::from_i64(rows))
    }

    #[test]
    fn tangent_projection_matches_the_plane_formula() {
        let p = tangent_projection(&QMat::from_i64(&[&[1], &[0]])).unwrap();
        assert_eq!(p, QMat::from_i64(&[&[0, 0], &[0, 1]]));
    }

    #[test]
    fn tangent_projection_kills_the_base_point() {
        let x = QMat::new(2, 1, vec![q(3, 5), q(4, 5)]);
        let p = tangent_projection(&x).unwrap();
        assert!(p.mul(&x).unwrap().is_zero());
        assert_eq!(p.mul(&p).unwrap(), p);
        assert_eq!(p.transpose(), p);
        assert_eq!(p.rank(), 1);
    }

    #[test]
    fn tangent_projection_rejects_the_zero_vector() {
        let err = tangent_projection(&QMat::zero(3, 1)).unwrap_err();
        assert!(matches!(err, Error::Invalid(_)));
    }

    #[test]
    fn tangent_projection_is_idempotent_on_seeded_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x7a9);
        for dim in 1..=4usize {
            for _ in 0..12 {
                let x = QMat::new(
                    dim,
                    1,
                    (0..dim).map(|_| q(rng.gen_range(-9..=9), rng.gen_range(1..=9))).collect(),
                );
                if x.is_zero() {
                    continue;
                }
                let p = tangent_projection(&x).unwrap();
                assert_eq!(p.mul(&p).unwrap(), p);
                assert_eq!(p.transpose(), p);
                assert!(p.mul(&x).unwrap().is_zero());
                assert_eq!(p.rank(), dim - 1);
            }
        }
    }

    #[test]
    fn segment_tangent_attaches_by_zero_maps() {
        let t = build_tangent(&segment_manifold()).unwrap();
        let dims = t.stratum_fiber_dims();
        assert_eq!(dims[0], BTreeSet::from([0]));
        assert_eq!(dims[1], BTreeSet::from([1]));
        let attach = &t.layers[0].1;
        assert_eq!(attach.fiber_maps["s0@seg"], Mor::new(QMat::zero(0, 1)));
        assert_eq!(attach.fiber_maps["s1@seg"], Mor::new(QMat::zero(0, 1)));
        let err = flatten(&t).unwrap_err();
        assert!(matches!(err, Error::BundleTheorem(_)));
    }

    #[test]
    fn cube_tangent_realizes_the_expected_strata() {
        let p = cube_manifold();
        let space = polytopal_space(&p).unwrap();
        let asm = assemble(&space).unwrap();
        assert_eq!(asm.total.dim_counts(), vec![8, 12, 6, 1]);
        let t = build_tangent(&p).unwrap();
        let dims = t.stratum_fiber_dims();
        assert_eq!(
            dims,
            vec![
                BTreeSet::from([0]),
                BTreeSet::from([1]),
                BTreeSet::from([2]),
                BTreeSet::from([3])
            ]
        );
        let err = flatten(&t).unwrap_err();
        assert!(matches!(err, Error::BundleTheorem(_)));
    }

    #[test]
    fn flap_attach_is_the_orthogonal_projection() {
        let t = build_tangent(&flap_manifold()).unwrap();
        let attach = &t.layers[0].1;
        assert_eq!(attach.fiber_maps["a@sq"], mor(&[&[1, 0]]));
        assert_eq!(attach.fiber_maps["b@sq"], mor(&[&[1, 0]]));
        assert!(matches!(flatten(&t).unwrap_err(), Error::BundleTheorem(_)));
    }

    #[test]
    fn identical_projections_witness_by_identities() {
        let report = choice_independence_check(&flap_manifold(), &BTreeMap::new()).unwrap();
        assert!(report.families_agree);
        let IsoOutcome::Witness(w) = &report.outcome else {
            panic!("expected a witness, got {:?}", report.outcome)
        };
        assert!(w.layer0.values().all(|g| g.matrix.is_identity()));
        assert!(w.layers.iter().all(|g| g.values().all(|m| m.matrix.is_identity())));
    }

    #[test]
    fn skewed_projection_gives_an_isomorphic_tangent() {
        let alt = BTreeMap::from([
            ("a@sq".to_string(), mor(&[&[1, 1]])),
            ("b@sq".to_string(), mor(&[&[1, 1]])),
        ]);
        let report = choice_independence_check(&flap_manifold(), &alt).unwrap();
        assert!(!report.families_agree);
        let IsoOutcome::Witness(w) = &report.outcome else {
            panic!("expected a witness, got {:?}", report.outcome)
        };
        let nontrivial = w.layers.iter().any(|g| g.values().any(|m| !m.matrix.is_identity()))
            || w.layer0.values().any(|m| !m.matrix.is_identity());
        assert!(nontrivial);
    }

    #[test]
    fn sign_flipped_projection_is_isomorphic() {
        let alt = BTreeMap::from([
            ("a@sq".to_string(), mor(&[&[-1, 0]])),
            ("b@sq".to_string(), mor(&[&[-1, 0]])),
        ]);
        let report = choice_independence_check(&flap_manifold(), &alt).unwrap();
        assert!(report.isomorphic());
    }

    #[test]
    fn rank_dropping_projection_is_rejected() {
        let alt = BTreeMap::from([
            ("a@sq".to_string(), mor(&[&[0, 0]])),
            ("b@sq".to_string(), mor(&[&[0, 0]])),
        ]);
        let err = choice_independence_check(&flap_manifold(), &alt).unwrap_err();
        assert!(matches!(err, Error::NotSurjective(_)));
    }

    #[test]
    fn mismatched_direction_basis_is_rejected() {
        let mut p = flap_manifold();
        p.cells.get_mut("ab").unwrap().basis = QMat::from_i64(&[&[0], &[1]]);
        assert!(polytopal_space(&p).is_err());
    }

    #[test]
    fn flap_space_assembles_to_a_disc() {
        let space = polytopal_space(&flap_manifold()).unwrap();
        let asm = assemble(&space).unwrap();
        assert_eq!(asm.total.dim_counts(), vec![4, 4, 1]);
        assert_eq!(asm.total.euler_characteristic(), 1);
    }
}
