//! Flat V-bundles over cell complexes: cocycle data, gauge moves, parallel
//! transport, isomorphism testing, pullback, and holonomy classification.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::complex::{Boundary, CellComplex, CellId, CellularMap, Step};
use crate::error::{Error, Result};
use crate::lincat::{compose, CatKind, Mor, Obj, StructureCategory};
use crate::matrix::{qi, QMat, Q};
use crate::report::ValidationReport;

/// A flat cocycle: one fiber object per connected component of the base and
/// one invertible label per oriented 1-cell. Traversing an edge against its
/// orientation applies the inverse label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VBundle {
    pub base: CellComplex,
    pub category: Arc<StructureCategory>,
    /// Fiber object per component, keyed by the component's least vertex.
    pub fiber: BTreeMap<CellId, Obj>,
    /// Edge label per 1-cell, oriented from the edge's `from` vertex.
    pub labels: BTreeMap<CellId, Mor>,
}

/// A change of trivialization: an automorphism of the fiber at each vertex.
/// Acts on a label by `g(dst) . label . g(src)^-1`. Vertices without an
/// entry act by the identity.
pub type Gauge = BTreeMap<CellId, Mor>;

/// Verdict of an isomorphism search that may not be decidable within budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IsoOutcome<W> {
    Witness(W),
    NoIso { reason: String },
    Inconclusive { reason: String },
}

impl<W> IsoOutcome<W> {
    pub fn is_witness(&self) -> bool {
        matches!(self, IsoOutcome::Witness(_))
    }

    pub fn witness(self) -> Option<W> {
        match self {
            IsoOutcome::Witness(w) => Some(w),
            _ => None,
        }
    }
}

impl VBundle {
    /// Assembles and validates a bundle.
    pub fn build(
        base: CellComplex,
        category: Arc<StructureCategory>,
        fiber: BTreeMap<CellId, Obj>,
        labels: BTreeMap<CellId, Mor>,
    ) -> Result<VBundle> {
        let bundle = VBundle { base, category, fiber, labels };
        validate_bundle(&bundle).into_result()?;
        Ok(bundle)
    }

    /// The product bundle: every component gets the same fiber object and
    /// every edge the identity label.
    pub fn trivial(
        base: CellComplex,
        category: Arc<StructureCategory>,
        dim: usize,
    ) -> Result<VBundle> {
        if !category.contains_object(dim) {
            return Err(Error::NotInCategory(format!(
                "dimension {dim} is not an object of {}",
                category.name
            )));
        }
        let fiber: BTreeMap<CellId, Obj> =
            base.components().keys().map(|k| (k.clone(), Obj::new(dim))).collect();
        let labels: BTreeMap<CellId, Mor> = base
            .cells_of_dim(1)
            .map(|(id, _)| (id.clone(), Mor::identity(dim)))
            .collect();
        Ok(VBundle { base, category, fiber, labels })
    }

    /// Fiber dimension over the component containing `cell`.
    pub fn fiber_dim_at(&self, cell: &str) -> Result<usize> {
        let key = self.base.component_key_of(cell)?;
        self.fiber
            .get(&key)
            .map(|o| o.dim)
            .ok_or_else(|| Error::Invalid(format!("no fiber recorded for component {key:?}")))
    }

    /// Label of an edge traversed by `step`, inverted for reversed steps.
    pub fn step_label(&self, step: &Step) -> Result<Mor> {
        let label = self
            .labels
            .get(&step.edge)
            .ok_or_else(|| Error::Invalid(format!("no label on edge {:?}", step.edge)))?;
        if step.reverse {
            label.inverse().ok_or_else(|| {
                Error::Singular(format!("label on edge {:?} is not invertible", step.edge))
            })
        } else {
            Ok(label.clone())
        }
    }
}

/// Ordered product of edge labels along a walk starting at `start`; the
/// empty walk transports by the identity.
pub fn transport(bundle: &VBundle, start: &str, walk: &[Step]) -> Result<Mor> {
    let dim = bundle.fiber_dim_at(start)?;
    let mut acc = Mor::identity(dim);
    let mut at = start.to_string();
    for step in walk {
        let (from, to) = bundle.base.step_endpoints(step)?;
        if from != at {
            return Err(Error::Invalid(format!(
                "walk step over edge {:?} starts at {from:?}, expected {at:?}",
                step.edge
            )));
        }
        acc = compose(&bundle.step_label(step)?, &acc)?;
        at = to;
    }
    Ok(acc)
}

/// Ordered product of labels around a 2-cell's boundary walk.
pub fn holonomy_around(bundle: &VBundle, face: &str) -> Result<Mor> {
    let cell = bundle
        .base
        .cell(face)
        .ok_or_else(|| Error::Invalid(format!("no cell {face:?}")))?;
    let Boundary::Face { walk } = &cell.boundary else {
        return Err(Error::Invalid(format!("{face:?} is not a 2-cell")));
    };
    let (start, _) = bundle
        .base
        .walk_endpoints(walk)?
        .ok_or_else(|| Error::Invalid(format!("2-cell {face:?} has an empty walk")))?;
    transport(bundle, &start, walk)
}

/// Checks fibers against components, labels against the category, and
/// flatness on every 2-cell. Labels must be invertible inside the category;
/// groupoid categories guarantee that, others are checked label by label.
pub fn validate_bundle(bundle: &VBundle) -> ValidationReport {
    let mut report = ValidationReport::new("bundle");
    let base_report = bundle.base.validate_complex();
    for v in &base_report.violations {
        report.push("base", format!("{}: {}", v.rule, v.detail));
    }
    if !report.is_valid() {
        return report;
    }

    let components = bundle.base.components();
    for key in components.keys() {
        match bundle.fiber.get(key) {
            None => report.push("fiber", format!("component {key:?} has no fiber object")),
            Some(obj) => {
                if !bundle.category.contains_object(obj.dim) {
                    report.push(
                        "fiber",
                        format!(
                            "fiber dimension {} on component {key:?} is not an object of {}",
                            obj.dim, bundle.category.name
                        ),
                    );
                }
            }
        }
    }
    for key in bundle.fiber.keys() {
        if !components.contains_key(key) {
            report.push("fiber", format!("fiber entry {key:?} is not a component key"));
        }
    }

    for (id, _) in bundle.base.cells_of_dim(1) {
        if !bundle.labels.contains_key(id) {
            report.push("labels", format!("edge {id:?} has no label"));
        }
    }
    for (id, label) in &bundle.labels {
        let Some(cell) = bundle.base.cell(id) else {
            report.push("labels", format!("label on unknown edge {id:?}"));
            continue;
        };
        if cell.dim != 1 {
            report.push("labels", format!("label on {id:?}, which is not an edge"));
            continue;
        }
        let dim = match bundle.fiber_dim_at(id) {
            Ok(d) => d,
            Err(e) => {
                report.push("labels", format!("edge {id:?}: {e}"));
                continue;
            }
        };
        if label.src().dim != dim || label.dst().dim != dim {
            report.push(
                "labels",
                format!(
                    "label on {id:?} is {}x{}, fiber dimension is {dim}",
                    label.matrix.rows(),
                    label.matrix.cols()
                ),
            );
            continue;
        }
        if !bundle.category.contains_morphism(label) {
            report.push(
                "labels",
                format!("label on {id:?} is not a morphism of {}", bundle.category.name),
            );
        }
        match label.inverse() {
            None => report.push("labels", format!("label on {id:?} is not invertible")),
            Some(inv) => {
                if !bundle.category.contains_morphism(&inv) {
                    report.push(
                        "labels",
                        format!(
                            "inverse of the label on {id:?} is not a morphism of {}",
                            bundle.category.name
                        ),
                    );
                }
            }
        }
    }
    if !report.is_valid() {
        return report;
    }

    for (id, _) in bundle.base.cells_of_dim(2) {
        match holonomy_around(bundle, id) {
            Ok(h) => {
                if !h.is_identity() {
                    report.push("flatness", format!("2-cell {id:?} has holonomy != identity"));
                }
            }
            Err(e) => report.push("flatness", format!("2-cell {id:?}: {e}")),
        }
    }
    report
}

/// Applies a gauge: each label becomes `g(dst) . label . g(src)^-1`. Every
/// gauge entry must be an in-category automorphism of the local fiber, and
/// the moved labels must stay in the category.
pub fn apply_gauge(bundle: &VBundle, gauge: &Gauge) -> Result<VBundle> {
    let identity_at = |v: &str| -> Result<Mor> { Ok(Mor::identity(bundle.fiber_dim_at(v)?)) };
    let gauge_at = |v: &str| -> Result<Mor> {
        match gauge.get(v) {
            None => identity_at(v),
            Some(g) => {
                let dim = bundle.fiber_dim_at(v)?;
                if !g.is_endo() || g.src().dim != dim {
                    return Err(Error::DimensionMismatch(format!(
                        "gauge at {v:?} is {}x{}, fiber dimension is {dim}",
                        g.matrix.rows(),
                        g.matrix.cols()
                    )));
                }
                bundle.category.require_morphism(g, &format!("gauge at {v:?}"))?;
                Ok(g.clone())
            }
        }
    };
    let mut labels = BTreeMap::new();
    for (id, label) in &bundle.labels {
        let Some(Boundary::Edge { from, to }) = bundle.base.cell(id).map(|c| &c.boundary) else {
            return Err(Error::Invalid(format!("label on unknown edge {id:?}")));
        };
        let g_src = gauge_at(from)?;
        let g_dst = gauge_at(to)?;
        let g_src_inv = g_src
            .inverse()
            .ok_or_else(|| Error::Singular(format!("gauge at {from:?} is not invertible")))?;
        let moved = compose(&compose(&g_dst, label)?, &g_src_inv)?;
        bundle
            .category
            .require_morphism(&moved, &format!("gauged label on edge {id:?}"))?;
        labels.insert(id.clone(), moved);
    }
    Ok(VBundle {
        base: bundle.base.clone(),
        category: bundle.category.clone(),
        fiber: bundle.fiber.clone(),
        labels,
    })
}

/// Normalizes and also returns the gauge that was applied, so callers can
/// translate witnesses back to the original trivialization.
pub fn normalize_with_gauge(bundle: &VBundle) -> Result<(VBundle, Gauge)> {
    let mut gauge: Gauge = BTreeMap::new();
    for key in bundle.base.components().keys() {
        let dim = bundle.fiber_dim_at(key)?;
        let tree = bundle.base.spanning_tree(key)?;
        gauge.insert(tree.root.clone(), Mor::identity(dim));
        for v in &tree.order {
            if v == &tree.root {
                continue;
            }
            let (parent, step) = &tree.parent[v];
            let g_parent = gauge[parent].clone();
            let label = bundle
                .labels
                .get(&step.edge)
                .ok_or_else(|| Error::Invalid(format!("no label on edge {:?}", step.edge)))?;
            // Forward tree step u -> w zeroes the label via g(w) = g(u) . t^-1;
            // a reversed step needs g(w) = g(u) . t.
            let g_child = if step.reverse {
                compose(&g_parent, label)?
            } else {
                let inv = label.inverse().ok_or_else(|| {
                    Error::Singular(format!("label on edge {:?} is not invertible", step.edge))
                })?;
                compose(&g_parent, &inv)?
            };
            gauge.insert(v.clone(), g_child);
        }
    }
    let normalized = apply_gauge(bundle, &gauge)?;
    Ok((normalized, gauge))
}

/// Gauges the bundle so every spanning-tree edge label is the identity;
/// holonomy content moves onto the non-tree edges.
pub fn normalize(bundle: &VBundle) -> Result<VBundle> {
    normalize_with_gauge(bundle).map(|(b, _)| b)
}

/// Non-tree edges of the component rooted at `key`, in sorted order.
fn holonomy_edges(base: &CellComplex, key: &str) -> Result<Vec<CellId>> {
    let tree = base.spanning_tree(key)?;
    let mut edges = Vec::new();
    for (id, cell) in base.cells_of_dim(1) {
        let Boundary::Edge { from, .. } = &cell.boundary else { continue };
        if tree.vertices.contains(from) && !tree.tree_edges.contains(id) {
            edges.push(id.clone());
        }
    }
    Ok(edges)
}

/// Decides whether two bundles over the same base and category are gauge
/// equivalent, producing a witnessing gauge on success. The search is
/// definite for finite categories; open categories go through an exact
/// intertwiner computation that may report `Inconclusive` when the
/// invertibility search exceeds its budget.
pub fn isomorphism_outcome(e: &VBundle, f: &VBundle) -> Result<IsoOutcome<Gauge>> {
    if e.base != f.base {
        return Err(Error::Invalid("isomorphism test needs a common base".into()));
    }
    if e.category != f.category {
        return Err(Error::Invalid("isomorphism test needs a common category".into()));
    }
    let (e_norm, e_gauge) = normalize_with_gauge(e)?;
    let (f_norm, f_gauge) = normalize_with_gauge(f)?;

    let mut witness: Gauge = BTreeMap::new();
    for (key, cells) in e.base.components() {
        let dim_e = e.fiber_dim_at(&key)?;
        let dim_f = f.fiber_dim_at(&key)?;
        if dim_e != dim_f {
            return Ok(IsoOutcome::NoIso {
                reason: format!(
                    "component {key:?} has fiber dimensions {dim_e} and {dim_f}"
                ),
            });
        }
        let edges = holonomy_edges(&e.base, &key)?;
        let a: Vec<Mor> = edges.iter().map(|id| e_norm.labels[id].clone()).collect();
        let b: Vec<Mor> = edges.iter().map(|id| f_norm.labels[id].clone()).collect();
        let conjugator = match conjugating_automorphism(&e.category, dim_e, &a, &b)? {
            IsoOutcome::Witness(h) => h,
            IsoOutcome::NoIso { reason } => {
                return Ok(IsoOutcome::NoIso {
                    reason: format!("component {key:?}: {reason}"),
                })
            }
            IsoOutcome::Inconclusive { reason } => {
                return Ok(IsoOutcome::Inconclusive {
                    reason: format!("component {key:?}: {reason}"),
                })
            }
        };
        for v in &cells {
            if e.base.dim_of(v) != Some(0) {
                continue;
            }
            // Translate the constant conjugator back through both
            // normalizing gauges: gamma = gF^-1 . h . gE.
            let g_e = e_gauge
                .get(v)
                .cloned()
                .unwrap_or_else(|| Mor::identity(dim_e));
            let g_f_inv = f_gauge
                .get(v)
                .cloned()
                .unwrap_or_else(|| Mor::identity(dim_e))
                .inverse()
                .ok_or_else(|| Error::Singular(format!("gauge at {v:?} is not invertible")))?;
            witness.insert(v.clone(), compose(&compose(&g_f_inv, &conjugator)?, &g_e)?);
        }
    }
    Ok(IsoOutcome::Witness(witness))
}

/// Gauge equivalence test; `None` means definitely not isomorphic. An
/// inconclusive open-category search surfaces as an error rather than a
/// false negative.
pub fn is_isomorphic(e: &VBundle, f: &VBundle) -> Result<Option<Gauge>> {
    match isomorphism_outcome(e, f)? {
        IsoOutcome::Witness(g) => Ok(Some(g)),
        IsoOutcome::NoIso { .. } => Ok(None),
        IsoOutcome::Inconclusive { reason } => {
            Err(Error::Invalid(format!("isomorphism test inconclusive: {reason}")))
        }
    }
}

/// Searches for an in-category automorphism `h` with `h . a_i . h^-1 = b_i`
/// for all `i`. Finite categories are searched exhaustively (lex-least
/// witness); open ones solve the intertwiner equations exactly.
pub fn conjugating_automorphism(
    category: &StructureCategory,
    dim: usize,
    a: &[Mor],
    b: &[Mor],
) -> Result<IsoOutcome<Mor>> {
    if a.len() != b.len() {
        return Err(Error::Invalid("label lists differ in length".into()));
    }
    match &category.kind {
        CatKind::Finite { .. } => {
            for h in category.automorphisms(dim)? {
                let Some(h_inv) = h.inverse() else { continue };
                let mut ok = true;
                for (x, y) in a.iter().zip(b) {
                    if &compose(&compose(&h, x)?, &h_inv)? != y {
                        ok = false;
                        break;
                    }
                }
                if ok {
                    return Ok(IsoOutcome::Witness(h));
                }
            }
            Ok(IsoOutcome::NoIso {
                reason: "no automorphism conjugates the holonomies".into(),
            })
        }
        CatKind::Open(_) => {
            if dim == 0 {
                return Ok(IsoOutcome::Witness(Mor::identity(0)));
            }
            let basis = intertwiner_space(a, b, dim, dim);
            if basis.is_empty() {
                return Ok(IsoOutcome::NoIso { reason: "the intertwiner space is zero".into() });
            }
            match invertible_in_span(&basis, dim, 0x5eed) {
                SpanSearch::Found(m) => {
                    let h = Mor::new(m);
                    category.require_morphism(&h, "conjugating automorphism")?;
                    Ok(IsoOutcome::Witness(h))
                }
                SpanSearch::Empty => Ok(IsoOutcome::NoIso {
                    reason: "every intertwiner is singular".into(),
                }),
                SpanSearch::Unknown => Ok(IsoOutcome::Inconclusive {
                    reason: "no invertible intertwiner found within the sampling budget".into(),
                }),
            }
        }
    }
}

/// Basis of the space of matrices `H` (dst_dim x src_dim) with
/// `H . a_i = b_i . H` for all `i`, via the row-major vectorization
/// `(I (x) a^T - b (x) I) vec(H) = 0`.
pub fn intertwiner_space(a: &[Mor], b: &[Mor], src_dim: usize, dst_dim: usize) -> Vec<QMat> {
    let unknowns = dst_dim * src_dim;
    if unknowns == 0 {
        return Vec::new();
    }
    let mut rows: Vec<Vec<Q>> = Vec::new();
    for (x, y) in a.iter().zip(b) {
        let left = QMat::identity(dst_dim).kron(&x.matrix.transpose());
        let right = y.matrix.kron(&QMat::identity(src_dim));
        let constraint = left.sub(&right).expect("both Kronecker factors are square");
        for i in 0..constraint.rows() {
            rows.push(constraint.row(i).to_vec());
        }
    }
    if rows.is_empty() {
        rows.push(vec![Q::zero(); unknowns]);
    }
    let system = QMat::from_rows(rows).expect("constraint rows share a width");
    system
        .nullspace()
        .into_iter()
        .map(|v| {
            let mut m = QMat::zero(dst_dim, src_dim);
            for r in 0..dst_dim {
                for c in 0..src_dim {
                    m.set(r, c, v.at(r * src_dim + c, 0).clone());
                }
            }
            m
        })
        .collect()
}

/// Result of searching a matrix span for an invertible element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpanSearch {
    Found(QMat),
    /// Proven: every element of the span is singular.
    Empty,
    /// Sampling budget exhausted without a proof either way.
    Unknown,
}

/// Looks for an invertible element of `span(basis)` among square matrices of
/// size `dim`. Small spans are decided exactly: the determinant has degree
/// at most `dim` in each coefficient, so vanishing on the full grid
/// `{0..dim}^k` proves the span contains no invertible element.
pub fn invertible_in_span(basis: &[QMat], dim: usize, seed: u64) -> SpanSearch {
    if basis.is_empty() || dim == 0 {
        return if dim == 0 && !basis.is_empty() {
            SpanSearch::Found(QMat::identity(0))
        } else {
            SpanSearch::Empty
        };
    }
    for m in basis {
        if m.inverse().is_some() {
            return SpanSearch::Found(m.clone());
        }
    }
    let k = basis.len();
    let grid = dim + 1;
    let grid_size = (grid as u128).checked_pow(k as u32);
    if let Some(total) = grid_size {
        if total <= 20_000 {
            let mut coeffs = vec![0usize; k];
            for _ in 0..total {
                let mut m = QMat::zero(dim, dim);
                for (c, b) in coeffs.iter().zip(basis) {
                    m = m.add(&b.scale(&qi(*c as i64))).expect("basis matrices share a shape");
                }
                if m.inverse().is_some() {
                    return SpanSearch::Found(m);
                }
                let mut i = 0;
                while i < k {
                    coeffs[i] += 1;
                    if coeffs[i] < grid {
                        break;
                    }
                    coeffs[i] = 0;
                    i += 1;
                }
            }
            return SpanSearch::Empty;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..64 {
        let mut m = QMat::zero(dim, dim);
        for b in basis {
            m = m.add(&b.scale(&qi(rng.gen_range(-9..=9)))).expect("basis matrices share a shape");
        }
        if m.inverse().is_some() {
            return SpanSearch::Found(m);
        }
    }
    SpanSearch::Unknown
}

/// Pulls a bundle back along a cellular map into the map's source complex.
/// The label over an edge is the transport of the target bundle along the
/// edge's path image; degenerate edges pull back to identity labels.
pub fn pullback_bundle(map: &CellularMap, bundle: &VBundle) -> Result<VBundle> {
    if map.dst != bundle.base {
        return Err(Error::Invalid("map target differs from the bundle base".into()));
    }
    let mut fiber = BTreeMap::new();
    for key in map.src.components().keys() {
        let image = map.vertex_image(key)?;
        fiber.insert(key.clone(), Obj::new(bundle.fiber_dim_at(image)?));
    }
    let mut labels = BTreeMap::new();
    for (id, cell) in map.src.cells_of_dim(1) {
        let Boundary::Edge { from, .. } = &cell.boundary else { continue };
        let path = map
            .edge_paths
            .get(id)
            .ok_or_else(|| Error::NotCellular(format!("edge {id:?} has no path image")))?;
        let start = map.vertex_image(from)?;
        labels.insert(id.clone(), transport(bundle, start, path)?);
    }
    Ok(VBundle {
        base: map.src.clone(),
        category: bundle.category.clone(),
        fiber,
        labels,
    })
}

/// Restriction to a closed subcomplex, as pullback along the inclusion.
pub fn restriction(bundle: &VBundle, ids: &BTreeSet<CellId>) -> Result<VBundle> {
    let sub = bundle.base.subcomplex(ids)?;
    let inclusion = inclusion_map(&sub, &bundle.base)?;
    pullback_bundle(&inclusion, bundle)
}

/// The inclusion of a subcomplex into its ambient complex.
pub fn inclusion_map(sub: &CellComplex, ambient: &CellComplex) -> Result<CellularMap> {
    if !sub.is_subcomplex_of(ambient) {
        return Err(Error::Invalid("not a subcomplex of the ambient complex".into()));
    }
    let cell_images = sub.cells.keys().map(|id| (id.clone(), id.clone())).collect();
    let edge_paths = sub
        .cells_of_dim(1)
        .map(|(id, _)| (id.clone(), vec![Step::fwd(id.clone())]))
        .collect();
    Ok(CellularMap { src: sub.clone(), dst: ambient.clone(), cell_images, edge_paths })
}

/// One normalized representative per gauge-equivalence class of bundles
/// with positive fiber dimension at most `rank_cap`: spanning-tree labels
/// are the identity, non-tree labelings satisfy every 2-cell relator, and
/// each simultaneous-conjugacy orbit keeps its lex-least member.
pub fn classify_bundles(
    base: &CellComplex,
    category: &Arc<StructureCategory>,
    rank_cap: usize,
) -> Result<Vec<VBundle>> {
    if !category.is_finite() {
        return Err(Error::UnsupportedCategory(
            "classification needs a finite category".into(),
        ));
    }
    if !category.flags.is_groupoid {
        return Err(Error::UnsupportedCategory(
            "classification needs a groupoid".into(),
        ));
    }
    base.validate_complex().into_result()?;
    let dims: Vec<usize> = category
        .objects()?
        .into_iter()
        .filter(|d| *d >= 1 && *d <= rank_cap)
        .collect();

    let components = base.components();
    let mut edge_component: BTreeMap<CellId, CellId> = BTreeMap::new();
    for (id, _) in base.cells_of_dim(1) {
        edge_component.insert(id.clone(), base.component_key_of(id)?);
    }
    // Per component: every admissible (dimension, canonical labeling) pair.
    let mut component_classes: Vec<(CellId, Vec<(usize, BTreeMap<CellId, Mor>)>)> = Vec::new();
    for key in components.keys() {
        let pres = crate::complex::pi1(base, key)?;
        let generators = pres.generators.clone();
        let mut classes = Vec::new();
        for &dim in &dims {
            let aut = category.automorphisms(dim)?;
            let satisfying = enumerate_flat_labelings(&generators, &pres.relators, &aut)?;
            for labeling in &satisfying {
                if is_conjugacy_canonical(labeling, &generators, &aut) {
                    classes.push((dim, labeling.clone()));
                }
            }
        }
        component_classes.push((key.clone(), classes));
    }

    // Cartesian product of per-component choices, last component fastest.
    let mut bundles = Vec::new();
    let counts: Vec<usize> = component_classes.iter().map(|(_, c)| c.len()).collect();
    if counts.contains(&0) {
        return Ok(Vec::new());
    }
    let mut index = vec![0usize; component_classes.len()];
    loop {
        let mut fiber = BTreeMap::new();
        let mut chosen: BTreeMap<&CellId, &(usize, BTreeMap<CellId, Mor>)> = BTreeMap::new();
        for (slot, (key, classes)) in component_classes.iter().enumerate() {
            let class = &classes[index[slot]];
            fiber.insert(key.clone(), Obj::new(class.0));
            chosen.insert(key, class);
        }
        let mut labels = BTreeMap::new();
        for (edge, key) in &edge_component {
            let (dim, labeling) = chosen[key];
            let label = labeling.get(edge).cloned().unwrap_or_else(|| Mor::identity(*dim));
            labels.insert(edge.clone(), label);
        }
        bundles.push(VBundle {
            base: base.clone(),
            category: category.clone(),
            fiber,
            labels,
        });
        if !advance_odometer(&mut index, &counts) {
            break;
        }
    }
    Ok(bundles)
}

/// Advances a mixed-radix counter, last slot fastest; false on wraparound.
fn advance_odometer(index: &mut [usize], counts: &[usize]) -> bool {
    for slot in (0..index.len()).rev() {
        index[slot] += 1;
        if index[slot] < counts[slot] {
            return true;
        }
        index[slot] = 0;
    }
    false
}

/// All maps generators -> aut whose induced holonomy kills every relator.
fn enumerate_flat_labelings(
    generators: &[CellId],
    relators: &[Vec<(CellId, bool)>],
    aut: &[Mor],
) -> Result<Vec<BTreeMap<CellId, Mor>>> {
    const BUDGET: usize = 1_000_000;
    let g = generators.len();
    let total = (aut.len() as u128).checked_pow(g as u32);
    match total {
        Some(t) if t <= BUDGET as u128 => {}
        _ => {
            return Err(Error::Invalid(format!(
                "labeling enumeration over {} generators exceeds the budget",
                g
            )))
        }
    }
    let mut out = Vec::new();
    let mut choice = vec![0usize; g];
    let radix = vec![aut.len(); g];
    loop {
        let labeling: BTreeMap<CellId, Mor> = generators
            .iter()
            .zip(&choice)
            .map(|(id, &i)| (id.clone(), aut[i].clone()))
            .collect();
        if relators_hold(&labeling, relators)? {
            out.push(labeling);
        }
        if !advance_odometer(&mut choice, &radix) {
            break;
        }
    }
    Ok(out)
}

fn relators_hold(
    labeling: &BTreeMap<CellId, Mor>,
    relators: &[Vec<(CellId, bool)>],
) -> Result<bool> {
    for relator in relators {
        let mut acc: Option<Mor> = None;
        for (gen, inverted) in relator {
            let label = &labeling[gen];
            let factor = if *inverted {
                label
                    .inverse()
                    .ok_or_else(|| Error::Singular(format!("label on {gen:?} not invertible")))?
            } else {
                label.clone()
            };
            acc = Some(match acc {
                None => factor,
                Some(prev) => compose(&factor, &prev)?,
            });
        }
        if let Some(product) = acc {
            if !product.is_identity() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// True when `labeling` is the lex-least member of its simultaneous
/// conjugacy orbit under the automorphism group.
fn is_conjugacy_canonical(
    labeling: &BTreeMap<CellId, Mor>,
    generators: &[CellId],
    aut: &[Mor],
) -> bool {
    let own: Vec<Mor> = generators.iter().map(|g| labeling[g].clone()).collect();
    for h in aut {
        let Some(h_inv) = h.inverse() else { continue };
        let conj: Vec<Mor> = own
            .iter()
            .map(|m| {
                compose(&compose(h, m).expect("dims agree"), &h_inv).expect("dims agree")
            })
            .collect();
        if conj < own {
            return false;
        }
    }
    true
}

/// The gauge-invariant summary exposed for open categories: the dimension
/// vector and the determinant of the holonomy on each loop generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BundleInvariants {
    /// Component key to fiber dimension.
    pub dims: BTreeMap<CellId, usize>,
    /// Component key to (non-tree edge, determinant of its normalized label).
    pub loop_determinants: BTreeMap<CellId, Vec<(CellId, Q)>>,
}

pub fn bundle_invariants(bundle: &VBundle) -> Result<BundleInvariants> {
    let normalized = normalize(bundle)?;
    let mut dims = BTreeMap::new();
    let mut loop_determinants = BTreeMap::new();
    for key in bundle.base.components().keys() {
        dims.insert(key.clone(), bundle.fiber_dim_at(key)?);
        let mut dets = Vec::new();
        for edge in holonomy_edges(&bundle.base, key)? {
            dets.push((edge.clone(), normalized.labels[&edge].matrix.det()?));
        }
        loop_determinants.insert(key.clone(), dets);
    }
    Ok(BundleInvariants { dims, loop_determinants })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{circle, interval, point, square_disc};
    use crate::matrix::q;

    fn sp(n: usize) -> Arc<StructureCategory> {
        Arc::new(StructureCategory::signed_perm(n))
    }

    fn mor(rows: &[&[i64]]) -> Mor {
        Mor::new(QMat::from_i64(rows))
    }

    fn circle_bundle(label: Mor) -> VBundle {
        let dim = label.src().dim;
        crate::fixtures::circle_bundle(sp(dim.max(1)), label)
    }

    #[test]
    fn trivial_bundle_is_valid() {
        let b = VBundle::trivial(square_disc(), sp(2), 2).unwrap();
        assert!(validate_bundle(&b).is_valid());
    }

    #[test]
    fn mobius_cocycle_is_valid() {
        let b = circle_bundle(mor(&[&[-1]]));
        assert!(validate_bundle(&b).is_valid());
    }

    #[test]
    fn nontrivial_disc_holonomy_is_invalid() {
        let mut b = VBundle::trivial(square_disc(), sp(1), 1).unwrap();
        b.labels.insert("s0".into(), mor(&[&[-1]]));
        let report = validate_bundle(&b);
        assert!(!report.is_valid());
        assert!(report.violations.iter().any(|v| v.rule == "flatness" && v.detail.contains("f")));
    }

    #[test]
    fn missing_label_and_bad_fiber_are_reported() {
        let mut b = VBundle::trivial(interval(), sp(1), 1).unwrap();
        b.labels.remove("i");
        b.fiber.insert("zz".into(), Obj::new(1));
        let report = validate_bundle(&b);
        let rules: Vec<&str> = report.violations.iter().map(|v| v.rule.as_str()).collect();
        assert!(rules.contains(&"labels"));
        assert!(rules.contains(&"fiber"));
    }

    #[test]
    fn transport_multiplies_along_the_walk() {
        let mut base = CellComplex::new();
        base.add_vertex("u").add_vertex("w").add_edge("a", "u", "w").add_edge("b", "w", "u");
        let fiber = BTreeMap::from([(String::from("u"), Obj::new(1))]);
        let labels = BTreeMap::from([
            (String::from("a"), mor(&[&[-1]])),
            (String::from("b"), mor(&[&[-1]])),
        ]);
        let bundle = VBundle { base, category: sp(1), fiber, labels };
        let loop_walk = vec![Step::fwd("a"), Step::fwd("b")];
        assert_eq!(transport(&bundle, "u", &loop_walk).unwrap(), Mor::identity(1));
        let half = vec![Step::fwd("a")];
        assert_eq!(transport(&bundle, "u", &half).unwrap(), mor(&[&[-1]]));
        assert_eq!(transport(&bundle, "u", &[]).unwrap(), Mor::identity(1));
        assert!(transport(&bundle, "w", &half).is_err());
    }

    #[test]
    fn normalize_concentrates_holonomy_on_non_tree_edges() {
        // Subdivided circle: two vertices, two edges, labels (-1, -1).
        let mut base = CellComplex::new();
        base.add_vertex("u").add_vertex("w").add_edge("a", "u", "w").add_edge("b", "w", "u");
        let fiber = BTreeMap::from([(String::from("u"), Obj::new(1))]);
        let labels = BTreeMap::from([
            (String::from("a"), mor(&[&[-1]])),
            (String::from("b"), mor(&[&[-1]])),
        ]);
        let bundle = VBundle { base, category: sp(1), fiber, labels };
        let (norm, gauge) = normalize_with_gauge(&bundle).unwrap();
        let tree = bundle.base.spanning_tree("u").unwrap();
        for e in &tree.tree_edges {
            assert!(norm.labels[e].is_identity());
        }
        // Total holonomy around the circle is preserved: (-1)(-1) = +1.
        let non_tree: Vec<_> = norm
            .labels
            .iter()
            .filter(|(id, _)| !tree.tree_edges.contains(*id))
            .collect();
        assert_eq!(non_tree.len(), 1);
        assert!(non_tree[0].1.is_identity());
        assert_eq!(apply_gauge(&bundle, &gauge).unwrap(), norm);
    }

    #[test]
    fn normalize_leaves_trivial_and_loop_labels_alone() {
        let t = VBundle::trivial(square_disc(), sp(1), 1).unwrap();
        assert_eq!(normalize(&t).unwrap(), t);
        let m = circle_bundle(mor(&[&[-1]]));
        assert_eq!(normalize(&m).unwrap(), m);
    }

    #[test]
    fn circle_sign_classes_are_distinct() {
        let plus = circle_bundle(mor(&[&[1]]));
        let minus = circle_bundle(mor(&[&[-1]]));
        assert!(is_isomorphic(&plus, &plus).unwrap().is_some());
        assert!(is_isomorphic(&plus, &minus).unwrap().is_none());
    }

    #[test]
    fn central_holonomy_is_not_conjugate_to_identity() {
        let id2 = circle_bundle(mor(&[&[1, 0], &[0, 1]]));
        let neg2 = circle_bundle(mor(&[&[-1, 0], &[0, -1]]));
        assert!(is_isomorphic(&id2, &neg2).unwrap().is_none());
    }

    #[test]
    fn reflection_conjugacy_finds_a_witness() {
        let d = circle_bundle(mor(&[&[1, 0], &[0, -1]]));
        let minus_d = circle_bundle(mor(&[&[-1, 0], &[0, 1]]));
        let gauge = is_isomorphic(&d, &minus_d).unwrap().expect("conjugate by the swap");
        assert_eq!(apply_gauge(&d, &gauge).unwrap(), minus_d);
        let swap = circle_bundle(mor(&[&[0, 1], &[1, 0]]));
        assert!(is_isomorphic(&d, &swap).unwrap().is_none());
    }

    #[test]
    fn gauged_copies_are_isomorphic() {
        let d = circle_bundle(mor(&[&[0, -1], &[1, 0]]));
        let gauge: Gauge = BTreeMap::from([(String::from("v"), mor(&[&[0, 1], &[1, 0]]))]);
        let moved = apply_gauge(&d, &gauge).unwrap();
        let witness = is_isomorphic(&d, &moved).unwrap().expect("gauge copies are isomorphic");
        assert_eq!(apply_gauge(&d, &witness).unwrap(), moved);
    }

    #[test]
    fn pullback_along_identity_is_equal() {
        let m = circle_bundle(mor(&[&[-1]]));
        let id = CellularMap::identity(&m.base);
        assert_eq!(pullback_bundle(&id, &m).unwrap(), m);
    }

    #[test]
    fn degree_two_pullback_untwists_the_mobius_cocycle() {
        let m = circle_bundle(mor(&[&[-1]]));
        let double = CellularMap {
            src: m.base.clone(),
            dst: m.base.clone(),
            cell_images: BTreeMap::from([
                (String::from("v"), String::from("v")),
                (String::from("e"), String::from("e")),
            ]),
            edge_paths: BTreeMap::from([(String::from("e"), vec![Step::fwd("e"), Step::fwd("e")])]),
        };
        assert!(crate::complex::validate_cellular(&double).is_valid());
        let pulled = pullback_bundle(&double, &m).unwrap();
        assert!(pulled.labels["e"].is_identity());
        let trivial = circle_bundle(mor(&[&[1]]));
        assert!(is_isomorphic(&pulled, &trivial).unwrap().is_some());
    }

    #[test]
    fn restriction_is_pullback_along_inclusion() {
        let b = VBundle::trivial(square_disc(), sp(1), 1).unwrap();
        let ids: BTreeSet<CellId> =
            ["p0", "p1", "s0"].iter().map(|s| s.to_string()).collect();
        let restricted = restriction(&b, &ids).unwrap();
        assert_eq!(restricted.base.cells.len(), 3);
        let sub = b.base.subcomplex(&ids).unwrap();
        let inc = inclusion_map(&sub, &b.base).unwrap();
        assert_eq!(restricted, pullback_bundle(&inc, &b).unwrap());
    }

    #[test]
    fn point_has_one_class_at_cap_one() {
        let reps = classify_bundles(&point("p"), &sp(1), 1).unwrap();
        assert_eq!(reps.len(), 1);
        assert_eq!(reps[0].fiber_dim_at("p").unwrap(), 1);
    }

    #[test]
    fn circle_line_bundles_split_into_trivial_and_mobius() {
        let reps = classify_bundles(&circle(), &sp(1), 1).unwrap();
        assert_eq!(reps.len(), 2);
        let dets: Vec<Q> = reps.iter().map(|r| r.labels["e"].matrix.det().unwrap()).collect();
        assert!(dets.contains(&qi(1)) && dets.contains(&qi(-1)));
        assert!(is_isomorphic(&reps[0], &reps[1]).unwrap().is_none());
    }

    #[test]
    fn circle_rank_two_classes_follow_conjugacy() {
        // The signed 2x2 permutations form an eight-element dihedral group
        // with five conjugacy classes: identity, minus identity, the two
        // axis reflections, the two antidiagonal reflections, and the two
        // quarter-turn rotations. Rank 1 contributes the two sign classes.
        let reps = classify_bundles(&circle(), &sp(2), 2).unwrap();
        let rank1 = reps.iter().filter(|r| r.fiber_dim_at("v").unwrap() == 1).count();
        let rank2 = reps.iter().filter(|r| r.fiber_dim_at("v").unwrap() == 2).count();
        assert_eq!(rank1, 2);
        assert_eq!(rank2, 5);
        for (i, a) in reps.iter().enumerate() {
            for b in reps.iter().skip(i + 1) {
                if a.fiber_dim_at("v").unwrap() != b.fiber_dim_at("v").unwrap() {
                    continue;
                }
                assert!(is_isomorphic(a, b).unwrap().is_none());
            }
        }
    }

    #[test]
    fn disc_classification_kills_twisted_labelings() {
        // Over a contractible disc every flat cocycle is trivializable.
        let reps = classify_bundles(&square_disc(), &sp(1), 1).unwrap();
        assert_eq!(reps.len(), 1);
        assert!(validate_bundle(&reps[0]).is_valid());
    }

    #[test]
    fn random_cocycle_matches_exactly_one_representative() {
        let reps = classify_bundles(&circle(), &sp(2), 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cat = sp(2);
        for _ in 0..10 {
            let dim = if rng.gen_bool(0.5) { 1 } else { 2 };
            let aut = cat.automorphisms(dim).unwrap();
            let label = aut[rng.gen_range(0..aut.len())].clone();
            let candidate = circle_bundle_in(&cat, label);
            let hits = reps
                .iter()
                .filter(|r| is_isomorphic(r, &candidate).unwrap().is_some())
                .count();
            assert_eq!(hits, 1);
        }
    }

    fn circle_bundle_in(cat: &Arc<StructureCategory>, label: Mor) -> VBundle {
        let dim = label.src().dim;
        VBundle {
            base: circle(),
            category: cat.clone(),
            fiber: BTreeMap::from([(String::from("v"), Obj::new(dim))]),
            labels: BTreeMap::from([(String::from("e"), label)]),
        }
    }

    #[test]
    fn open_category_iso_solves_intertwiners() {
        let cat = Arc::new(StructureCategory::gl_open(2));
        let rot = Mor::new(QMat::from_rows(vec![
            vec![q(0, 1), q(-1, 1)],
            vec![q(1, 1), q(0, 1)],
        ]).unwrap());
        let a = circle_bundle_in(&cat, rot.clone());
        // Conjugating by any invertible matrix yields an isomorphic cocycle.
        let g = mor(&[&[1, 2], &[0, 1]]);
        let conj = compose(&compose(&g, &rot).unwrap(), &g.inverse().unwrap()).unwrap();
        let b = circle_bundle_in(&cat, conj);
        match isomorphism_outcome(&a, &b).unwrap() {
            IsoOutcome::Witness(w) => assert_eq!(apply_gauge(&a, &w).unwrap(), b),
            other => panic!("expected a witness, got {other:?}"),
        }
        // Distinct eigenvalue structure: scaling by 2 vs the rotation.
        let scale = mor(&[&[2, 0], &[0, 2]]);
        let c = circle_bundle_in(&cat, scale);
        match isomorphism_outcome(&a, &c).unwrap() {
            IsoOutcome::NoIso { .. } => {}
            other => panic!("expected no isomorphism, got {other:?}"),
        }
    }

    #[test]
    fn invariants_record_dims_and_loop_determinants() {
        let m = circle_bundle(mor(&[&[-1]]));
        let inv = bundle_invariants(&m).unwrap();
        assert_eq!(inv.dims["v"], 1);
        assert_eq!(inv.loop_determinants["v"], vec![(String::from("e"), qi(-1))]);
    }

    #[test]
    fn classification_rejects_open_categories() {
        let cat = Arc::new(StructureCategory::gl_open(2));
        assert!(matches!(
            classify_bundles(&circle(), &cat, 1),
            Err(Error::UnsupportedCategory(_))
        ));
    }
}
