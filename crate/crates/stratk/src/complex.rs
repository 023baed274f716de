//! Finite regular cell complexes, cellular maps, pushouts, stratified
//! spaces, and edge-path fundamental group presentations.
//!
//! Complexes record explicit combinatorial boundaries: edges carry ordered
//! endpoints, 2-cells carry closed oriented edge walks, higher cells carry
//! facet sets. Only the 2-skeleton feeds the fundamental group and bundle
//! flatness; higher cells are kept for counting and tangent geometry.

use crate::error::{Error, Result};
use crate::report::ValidationReport;
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// Cells are named by strings; quotients take the lexicographically least
/// merged id so output is deterministic.
pub type CellId = String;

/// One oriented traversal of a 1-cell inside a walk or an edge path.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Step {
    pub edge: CellId,
    pub reverse: bool,
}

impl Step {
    pub fn fwd(edge: impl Into<CellId>) -> Self {
        Step { edge: edge.into(), reverse: false }
    }

    pub fn rev(edge: impl Into<CellId>) -> Self {
        Step { edge: edge.into(), reverse: true }
    }

    pub fn flipped(&self) -> Step {
        Step { edge: self.edge.clone(), reverse: !self.reverse }
    }

    pub fn is_inverse_of(&self, other: &Step) -> bool {
        self.edge == other.edge && self.reverse != other.reverse
    }
}

/// Reverses a walk: steps in opposite order with flipped orientations.
pub fn reverse_walk(walk: &[Step]) -> Vec<Step> {
    walk.iter().rev().map(Step::flipped).collect()
}

/// Cancels adjacent inverse pairs, then inverse pairs wrapping around the
/// end of the cyclic word.
pub fn free_reduce_cyclic(walk: &[Step]) -> Vec<Step> {
    let mut stack: Vec<Step> = Vec::new();
    for s in walk {
        if stack.last().map(|t| t.is_inverse_of(s)).unwrap_or(false) {
            stack.pop();
        } else {
            stack.push(s.clone());
        }
    }
    while stack.len() >= 2 && stack.first().unwrap().is_inverse_of(stack.last().unwrap()) {
        stack.pop();
        stack.remove(0);
    }
    stack
}

/// Combinatorial boundary of a cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Boundary {
    Vertex,
    Edge { from: CellId, to: CellId },
    Face { walk: Vec<Step> },
    /// Cells of dimension 3 and above carry only their facet set; they feed
    /// cell counts and tangent geometry, never the fundamental group.
    Facets { facets: BTreeSet<CellId> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub dim: usize,
    pub boundary: Boundary,
    /// Stratum tag, present on assembled complexes: `i` means the cell lies
    /// in the open stratum attached at filtration level `i`.
    pub stratum: Option<usize>,
}

/// A finite cell complex.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CellComplex {
    pub cells: BTreeMap<CellId, Cell>,
}

impl CellComplex {
    pub fn new() -> Self {
        CellComplex::default()
    }

    pub fn add_vertex(&mut self, id: impl Into<CellId>) -> &mut Self {
        self.cells
            .insert(id.into(), Cell { dim: 0, boundary: Boundary::Vertex, stratum: None });
        self
    }

    pub fn add_edge(
        &mut self,
        id: impl Into<CellId>,
        from: impl Into<CellId>,
        to: impl Into<CellId>,
    ) -> &mut Self {
        self.cells.insert(
            id.into(),
            Cell {
                dim: 1,
                boundary: Boundary::Edge { from: from.into(), to: to.into() },
                stratum: None,
            },
        );
        self
    }

    pub fn add_face(&mut self, id: impl Into<CellId>, walk: Vec<Step>) -> &mut Self {
        self.cells
            .insert(id.into(), Cell { dim: 2, boundary: Boundary::Face { walk }, stratum: None });
        self
    }

    pub fn add_solid(
        &mut self,
        id: impl Into<CellId>,
        dim: usize,
        facets: BTreeSet<CellId>,
    ) -> &mut Self {
        assert!(dim >= 3, "solid cells have dimension at least 3");
        self.cells
            .insert(id.into(), Cell { dim, boundary: Boundary::Facets { facets }, stratum: None });
        self
    }

    pub fn cell(&self, id: &str) -> Option<&Cell> {
        self.cells.get(id)
    }

    pub fn dim_of(&self, id: &str) -> Option<usize> {
        self.cells.get(id).map(|c| c.dim)
    }

    pub fn cells_of_dim(&self, dim: usize) -> impl Iterator<Item = (&CellId, &Cell)> {
        self.cells.iter().filter(move |(_, c)| c.dim == dim)
    }

    pub fn max_dim(&self) -> usize {
        self.cells.values().map(|c| c.dim).max().unwrap_or(0)
    }

    pub fn dim_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.max_dim() + 1];
        for c in self.cells.values() {
            counts[c.dim] += 1;
        }
        if self.cells.is_empty() {
            counts.clear();
        }
        counts
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.cells.values().map(|c| if c.dim % 2 == 0 { 1 } else { -1 }).sum()
    }

    /// Endpoints of one oriented step, respecting its reverse flag.
    pub fn step_endpoints(&self, step: &Step) -> Result<(CellId, CellId)> {
        match self.cells.get(&step.edge).map(|c| &c.boundary) {
            Some(Boundary::Edge { from, to }) => {
                if step.reverse {
                    Ok((to.clone(), from.clone()))
                } else {
                    Ok((from.clone(), to.clone()))
                }
            }
            _ => Err(Error::Invalid(format!("step references non-edge {:?}", step.edge))),
        }
    }

    /// Start and end vertex of a consecutive walk; error when steps do not
    /// chain or reference missing edges. `None` for the empty walk.
    pub fn walk_endpoints(&self, walk: &[Step]) -> Result<Option<(CellId, CellId)>> {
        let mut endpoints: Option<(CellId, CellId)> = None;
        for step in walk {
            let (s, e) = self.step_endpoints(step)?;
            endpoints = match endpoints {
                None => Some((s, e)),
                Some((start, prev_end)) => {
                    if prev_end != s {
                        return Err(Error::Invalid(format!(
                            "walk breaks at {:?}: expected start {prev_end:?}, got {s:?}",
                            step.edge
                        )));
                    }
                    Some((start, e))
                }
            };
        }
        Ok(endpoints)
    }

    /// Structural checks: boundary references exist with correct dimensions,
    /// walks are closed, nonempty, and consecutive.
    pub fn validate_complex(&self) -> ValidationReport {
        let mut report = ValidationReport::new("cell complex");
        for (id, cell) in &self.cells {
            match (&cell.boundary, cell.dim) {
                (Boundary::Vertex, 0) => {}
                (Boundary::Edge { from, to }, 1) => {
                    for v in [from, to] {
                        if self.dim_of(v) != Some(0) {
                            report.push("boundary", format!("edge {id:?} endpoint {v:?} is not a vertex"));
                        }
                    }
                }
                (Boundary::Face { walk }, 2) => {
                    if walk.is_empty() {
                        report.push("walk", format!("2-cell {id:?} has an empty walk"));
                        continue;
                    }
                    for step in walk {
                        if self.dim_of(&step.edge) != Some(1) {
                            report.push(
                                "boundary",
                                format!("2-cell {id:?} walk references non-edge {:?}", step.edge),
                            );
                        }
                    }
                    match self.walk_endpoints(walk) {
                        Ok(Some((s, e))) if s != e => {
                            report.push("walk", format!("2-cell {id:?} walk is not closed"));
                        }
                        Ok(_) => {}
                        Err(err) => report.push("walk", format!("2-cell {id:?}: {err}")),
                    }
                }
                (Boundary::Facets { facets }, d) if d >= 3 => {
                    for f in facets {
                        if self.dim_of(f) != Some(d - 1) {
                            report.push(
                                "boundary",
                                format!("{d}-cell {id:?} facet {f:?} is not a {}-cell", d - 1),
                            );
                        }
                    }
                }
                (_, d) => {
                    report.push("dimension", format!("cell {id:?} has dim {d} inconsistent with its boundary kind"));
                }
            }
        }
        report
    }

    /// Ids directly referenced by a cell's boundary.
    pub fn boundary_refs(&self, id: &str) -> Vec<CellId> {
        match self.cells.get(id).map(|c| &c.boundary) {
            Some(Boundary::Vertex) | None => Vec::new(),
            Some(Boundary::Edge { from, to }) => vec![from.clone(), to.clone()],
            Some(Boundary::Face { walk }) => {
                let mut out: Vec<CellId> = walk.iter().map(|s| s.edge.clone()).collect();
                for s in walk {
                    if let Ok((a, b)) = self.step_endpoints(s) {
                        out.push(a);
                        out.push(b);
                    }
                }
                out
            }
            Some(Boundary::Facets { facets }) => facets.iter().cloned().collect(),
        }
    }

    /// Smallest subcomplex containing `ids`.
    pub fn closure_of(&self, ids: &BTreeSet<CellId>) -> BTreeSet<CellId> {
        let mut out = ids.clone();
        let mut frontier: Vec<CellId> = ids.iter().cloned().collect();
        while let Some(id) = frontier.pop() {
            for r in self.boundary_refs(&id) {
                if out.insert(r.clone()) {
                    frontier.push(r);
                }
            }
        }
        out
    }

    pub fn is_closed_set(&self, ids: &BTreeSet<CellId>) -> bool {
        ids.iter().all(|id| self.boundary_refs(id).iter().all(|r| ids.contains(r)))
            && ids.iter().all(|id| self.cells.contains_key(id))
    }

    /// The subcomplex on a closed id set.
    pub fn subcomplex(&self, ids: &BTreeSet<CellId>) -> Result<CellComplex> {
        if !self.is_closed_set(ids) {
            return Err(Error::Invalid("id set is not a closed subcomplex".into()));
        }
        Ok(CellComplex {
            cells: self
                .cells
                .iter()
                .filter(|(id, _)| ids.contains(*id))
                .map(|(id, c)| (id.clone(), c.clone()))
                .collect(),
        })
    }

    /// True when every cell of `self` appears in `other` with an identical
    /// boundary; stratum tags are ignored.
    pub fn is_subcomplex_of(&self, other: &CellComplex) -> bool {
        self.cells.iter().all(|(id, c)| {
            other
                .cells
                .get(id)
                .map(|oc| oc.dim == c.dim && oc.boundary == c.boundary)
                .unwrap_or(false)
        })
    }

    /// Vertex adjacency: for each vertex the incident steps, sorted by edge
    /// id, each leading to the far endpoint.
    fn adjacency(&self) -> BTreeMap<CellId, Vec<(Step, CellId)>> {
        let mut adj: BTreeMap<CellId, Vec<(Step, CellId)>> = BTreeMap::new();
        for (id, _) in self.cells_of_dim(0) {
            adj.entry(id.clone()).or_default();
        }
        for (id, cell) in self.cells_of_dim(1) {
            if let Boundary::Edge { from, to } = &cell.boundary {
                adj.entry(from.clone()).or_default().push((Step::fwd(id.clone()), to.clone()));
                adj.entry(to.clone()).or_default().push((Step::rev(id.clone()), from.clone()));
            }
        }
        for list in adj.values_mut() {
            list.sort();
        }
        adj
    }

    /// Connected components of the 1-skeleton, each keyed by its least
    /// vertex, listing all member vertices.
    pub fn components(&self) -> BTreeMap<CellId, BTreeSet<CellId>> {
        let adj = self.adjacency();
        let mut seen: BTreeSet<CellId> = BTreeSet::new();
        let mut out: BTreeMap<CellId, BTreeSet<CellId>> = BTreeMap::new();
        for v in adj.keys() {
            if seen.contains(v) {
                continue;
            }
            let mut comp = BTreeSet::new();
            let mut queue = VecDeque::from([v.clone()]);
            seen.insert(v.clone());
            while let Some(u) = queue.pop_front() {
                comp.insert(u.clone());
                for (_, w) in &adj[&u] {
                    if seen.insert(w.clone()) {
                        queue.push_back(w.clone());
                    }
                }
            }
            out.insert(comp.iter().next().unwrap().clone(), comp);
        }
        out
    }

    /// Component key (least vertex) of the component containing a cell.
    pub fn component_key_of(&self, id: &str) -> Result<CellId> {
        let vertex = self.a_vertex_of(id)?;
        for (key, members) in self.components() {
            if members.contains(&vertex) {
                return Ok(key);
            }
        }
        Err(Error::Invalid(format!("cell {id:?} lies in no component")))
    }

    /// Some vertex in the closure of a cell.
    pub fn a_vertex_of(&self, id: &str) -> Result<CellId> {
        let cell = self
            .cells
            .get(id)
            .ok_or_else(|| Error::Invalid(format!("no cell {id:?}")))?;
        match &cell.boundary {
            Boundary::Vertex => Ok(id.to_string()),
            Boundary::Edge { from, .. } => Ok(from.clone()),
            Boundary::Face { walk } => {
                let step = walk
                    .first()
                    .ok_or_else(|| Error::Invalid(format!("2-cell {id:?} has an empty walk")))?;
                Ok(self.step_endpoints(step)?.0)
            }
            Boundary::Facets { facets } => {
                let f = facets
                    .iter()
                    .next()
                    .ok_or_else(|| Error::Invalid(format!("cell {id:?} has no facets")))?;
                self.a_vertex_of(f)
            }
        }
    }

    /// Deterministic breadth-first spanning tree of one component, rooted at
    /// its least vertex. Neighbors are explored in sorted edge-id order.
    pub fn spanning_tree(&self, component_vertex: &str) -> Result<SpanningTree> {
        if self.dim_of(component_vertex) != Some(0) {
            return Err(Error::Invalid(format!("{component_vertex:?} is not a vertex")));
        }
        let components = self.components();
        let (root, members) = components
            .into_iter()
            .find(|(_, m)| m.contains(component_vertex))
            .ok_or_else(|| Error::Invalid(format!("{component_vertex:?} lies in no component")))?;
        let adj = self.adjacency();
        let mut tree = SpanningTree {
            root: root.clone(),
            vertices: members,
            parent: BTreeMap::new(),
            order: vec![root.clone()],
            tree_edges: BTreeSet::new(),
        };
        let mut queue = VecDeque::from([root.clone()]);
        let mut seen = BTreeSet::from([root]);
        while let Some(u) = queue.pop_front() {
            for (step, w) in &adj[&u] {
                if seen.insert(w.clone()) {
                    tree.parent.insert(w.clone(), (u.clone(), step.clone()));
                    tree.tree_edges.insert(step.edge.clone());
                    tree.order.push(w.clone());
                    queue.push_back(w.clone());
                }
            }
        }
        Ok(tree)
    }
}

/// Breadth-first spanning tree of one component.
#[derive(Debug, Clone)]
pub struct SpanningTree {
    pub root: CellId,
    pub vertices: BTreeSet<CellId>,
    /// Child vertex mapped to its parent and the step from parent to child.
    pub parent: BTreeMap<CellId, (CellId, Step)>,
    /// Breadth-first discovery order, root first.
    pub order: Vec<CellId>,
    pub tree_edges: BTreeSet<CellId>,
}

/// A cellular map between complexes. Every source cell designates an image
/// cell of equal or smaller dimension; every source edge additionally
/// carries an oriented edge-path image so that loops compose in the
/// fundamental group. An empty edge path means the edge degenerates to a
/// vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellularMap {
    pub src: CellComplex,
    pub dst: CellComplex,
    pub cell_images: BTreeMap<CellId, CellId>,
    pub edge_paths: BTreeMap<CellId, Vec<Step>>,
}

impl CellularMap {
    pub fn identity(complex: &CellComplex) -> CellularMap {
        let cell_images = complex.cells.keys().map(|id| (id.clone(), id.clone())).collect();
        let edge_paths = complex
            .cells_of_dim(1)
            .map(|(id, _)| (id.clone(), vec![Step::fwd(id.clone())]))
            .collect();
        CellularMap { src: complex.clone(), dst: complex.clone(), cell_images, edge_paths }
    }

    /// Builds a map from vertex images and edge paths, inferring the
    /// designated image of each higher cell. Edges infer the single-step
    /// target, the collapsed vertex, or the first traversed edge; a 2-cell
    /// whose image walk survives reduction must match the boundary of
    /// exactly one candidate 2-cell or the inference is ambiguous. Explicit
    /// entries in `overrides` win.
    pub fn infer(
        src: &CellComplex,
        dst: &CellComplex,
        vertex_images: BTreeMap<CellId, CellId>,
        edge_paths: BTreeMap<CellId, Vec<Step>>,
        overrides: BTreeMap<CellId, CellId>,
    ) -> Result<CellularMap> {
        let mut cell_images = vertex_images;
        for (id, cell) in &src.cells {
            if let Some(explicit) = overrides.get(id) {
                cell_images.insert(id.clone(), explicit.clone());
                continue;
            }
            match &cell.boundary {
                Boundary::Vertex => {
                    if !cell_images.contains_key(id) {
                        return Err(Error::NotCellular(format!("no image for vertex {id:?}")));
                    }
                }
                Boundary::Edge { from, .. } => {
                    let path = edge_paths
                        .get(id)
                        .ok_or_else(|| Error::NotCellular(format!("no edge path for {id:?}")))?;
                    let image = match path.as_slice() {
                        [] => cell_images
                            .get(from)
                            .cloned()
                            .ok_or_else(|| Error::NotCellular(format!("no image for vertex {from:?}")))?,
                        steps => steps[0].edge.clone(),
                    };
                    cell_images.insert(id.clone(), image);
                }
                Boundary::Face { walk } => {
                    let image_walk = map_walk(walk, &edge_paths)?;
                    let reduced = free_reduce_cyclic(&image_walk);
                    let image = if reduced.is_empty() {
                        let v = src.a_vertex_of(id)?;
                        cell_images
                            .get(&v)
                            .cloned()
                            .ok_or_else(|| Error::NotCellular(format!("no image for vertex {v:?}")))?
                    } else {
                        let candidates: Vec<CellId> = dst
                            .cells_of_dim(2)
                            .filter(|(_, c)| match &c.boundary {
                                Boundary::Face { walk } => {
                                    walk_wrap_degree(&free_reduce_cyclic(walk), &reduced).is_some()
                                }
                                _ => false,
                            })
                            .map(|(cid, _)| cid.clone())
                            .collect();
                        match candidates.as_slice() {
                            [only] => only.clone(),
                            [] => {
                                return Err(Error::NotCellular(format!(
                                    "2-cell {id:?} image walk matches no 2-cell of the target"
                                )))
                            }
                            many => {
                                return Err(Error::AmbiguousInference(format!(
                                    "2-cell {id:?} image walk matches {many:?}; supply cell_images explicitly"
                                )))
                            }
                        }
                    };
                    cell_images.insert(id.clone(), image);
                }
                Boundary::Facets { facets } => {
                    // A solid cell cannot be inferred from lower data unless
                    // exactly one target cell of the same dimension has all
                    // facet images in its closure.
                    let facet_images: Option<BTreeSet<CellId>> =
                        facets.iter().map(|f| cell_images.get(f).cloned()).collect();
                    let facet_images = facet_images.ok_or_else(|| {
                        Error::NotCellular(format!("facets of {id:?} lack images"))
                    })?;
                    let candidates: Vec<CellId> = dst
                        .cells
                        .iter()
                        .filter(|(_, c)| c.dim == cell.dim)
                        .filter(|(cid, _)| {
                            let closure = dst.closure_of(&BTreeSet::from([(*cid).clone()]));
                            facet_images.iter().all(|f| closure.contains(f))
                        })
                        .map(|(cid, _)| cid.clone())
                        .collect();
                    match candidates.as_slice() {
                        [only] => {
                            cell_images.insert(id.clone(), only.clone());
                        }
                        _ => {
                            return Err(Error::AmbiguousInference(format!(
                                "image of {}-cell {id:?} cannot be inferred; supply cell_images explicitly",
                                cell.dim
                            )))
                        }
                    }
                }
            }
        }
        Ok(CellularMap { src: src.clone(), dst: dst.clone(), cell_images, edge_paths })
    }

    pub fn vertex_image(&self, v: &str) -> Result<&CellId> {
        self.cell_images
            .get(v)
            .ok_or_else(|| Error::NotCellular(format!("no image for vertex {v:?}")))
    }

    pub fn edge_path(&self, e: &str) -> Result<&[Step]> {
        self.edge_paths
            .get(e)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::NotCellular(format!("no edge path for {e:?}")))
    }

    /// Image of a walk: each step is replaced by its edge path, reversed
    /// when the step is reversed. Degenerate edges contribute nothing.
    pub fn image_walk(&self, walk: &[Step]) -> Result<Vec<Step>> {
        map_walk(walk, &self.edge_paths)
    }
}

fn map_walk(walk: &[Step], edge_paths: &BTreeMap<CellId, Vec<Step>>) -> Result<Vec<Step>> {
    let mut out = Vec::new();
    for step in walk {
        let path = edge_paths
            .get(&step.edge)
            .ok_or_else(|| Error::NotCellular(format!("no edge path for {:?}", step.edge)))?;
        if step.reverse {
            out.extend(reverse_walk(path));
        } else {
            out.extend(path.iter().cloned());
        }
    }
    Ok(out)
}

/// Degree `d >= 1` such that `walk` is the `d`-fold repetition of a rotation
/// of `target` or of its reversal, as cyclic words.
pub fn walk_wrap_degree(target: &[Step], walk: &[Step]) -> Option<usize> {
    if target.is_empty() || walk.is_empty() || walk.len() % target.len() != 0 {
        return None;
    }
    let d = walk.len() / target.len();
    for oriented in [target.to_vec(), reverse_walk(target)] {
        for rot in 0..oriented.len() {
            let rotated: Vec<Step> =
                oriented.iter().cycle().skip(rot).take(oriented.len()).cloned().collect();
            if walk.chunks(target.len()).all(|chunk| chunk == rotated.as_slice()) {
                return Some(d);
            }
        }
    }
    None
}

/// Checks that a map is cellular: every cell has an image of equal or
/// smaller dimension, edge paths chain between the endpoint images, and the
/// image of every 2-cell walk either wraps the designated image 2-cell's
/// boundary some positive number of times or reduces freely to a point when
/// the image degenerates.
pub fn validate_cellular(map: &CellularMap) -> ValidationReport {
    let mut report = ValidationReport::new("cellular map");
    for (id, cell) in &map.src.cells {
        let Some(image) = map.cell_images.get(id) else {
            report.push("image", format!("no image for cell {id:?}"));
            continue;
        };
        let Some(image_cell) = map.dst.cells.get(image) else {
            report.push("image", format!("image {image:?} of {id:?} is not a target cell"));
            continue;
        };
        if image_cell.dim > cell.dim {
            report.push(
                "dimension",
                format!("cell {id:?} of dim {} maps to {image:?} of larger dim {}", cell.dim, image_cell.dim),
            );
            continue;
        }
        match &cell.boundary {
            Boundary::Vertex => {}
            Boundary::Edge { from, to } => {
                let Some(path) = map.edge_paths.get(id) else {
                    report.push("edge-path", format!("no edge path for {id:?}"));
                    continue;
                };
                let endpoints = match map.dst.walk_endpoints(path) {
                    Ok(ep) => ep,
                    Err(e) => {
                        report.push("edge-path", format!("edge {id:?}: {e}"));
                        continue;
                    }
                };
                let (want_s, want_e) = match (map.cell_images.get(from), map.cell_images.get(to)) {
                    (Some(a), Some(b)) => (a, b),
                    _ => continue,
                };
                match endpoints {
                    None => {
                        if want_s != want_e {
                            report.push(
                                "edge-path",
                                format!("edge {id:?} degenerates but endpoint images {want_s:?}, {want_e:?} differ"),
                            );
                        } else if image != want_s {
                            report.push(
                                "image",
                                format!("degenerate edge {id:?} must designate the endpoint image {want_s:?}"),
                            );
                        }
                    }
                    Some((s, e)) => {
                        if &s != want_s || &e != want_e {
                            report.push(
                                "edge-path",
                                format!(
                                    "edge {id:?} path runs {s:?} to {e:?} but endpoint images are {want_s:?}, {want_e:?}"
                                ),
                            );
                        }
                        if path.len() == 1 && image != &path[0].edge {
                            report.push(
                                "image",
                                format!("edge {id:?} traverses exactly {:?} but designates {image:?}", path[0].edge),
                            );
                        }
                    }
                }
            }
            Boundary::Face { walk } => {
                let image_walk = match map.image_walk(walk) {
                    Ok(w) => w,
                    Err(e) => {
                        report.push("walk", format!("2-cell {id:?}: {e}"));
                        continue;
                    }
                };
                let reduced = free_reduce_cyclic(&image_walk);
                if image_cell.dim == 2 {
                    let Boundary::Face { walk: target_walk } = &image_cell.boundary else {
                        continue;
                    };
                    if walk_wrap_degree(&free_reduce_cyclic(target_walk), &reduced).is_none() {
                        report.push(
                            "walk",
                            format!(
                                "2-cell {id:?}: image walk does not wrap the boundary of {image:?}"
                            ),
                        );
                    }
                } else if !reduced.is_empty() {
                    report.push(
                        "walk",
                        format!(
                            "2-cell {id:?} designates the degenerate image {image:?} but its image walk does not reduce to a point"
                        ),
                    );
                }
            }
            Boundary::Facets { facets } => {
                let closure = map.dst.closure_of(&BTreeSet::from([image.clone()]));
                for f in facets {
                    match map.cell_images.get(f) {
                        Some(fi) if closure.contains(fi) => {}
                        Some(fi) => report.push(
                            "facet",
                            format!("facet {f:?} of {id:?} maps to {fi:?} outside the closure of {image:?}"),
                        ),
                        None => {}
                    }
                }
            }
        }
    }
    report
}

/// Composition `g` after `f` of cellular maps (`f` first).
pub fn compose_cellular(g: &CellularMap, f: &CellularMap) -> Result<CellularMap> {
    if !f.dst.is_subcomplex_of(&g.src) {
        return Err(Error::NotCellular(
            "composition mismatch: first map does not land in the second map's source".into(),
        ));
    }
    let mut cell_images = BTreeMap::new();
    for (id, mid) in &f.cell_images {
        let end = g
            .cell_images
            .get(mid)
            .ok_or_else(|| Error::NotCellular(format!("no image for intermediate cell {mid:?}")))?;
        cell_images.insert(id.clone(), end.clone());
    }
    let mut edge_paths = BTreeMap::new();
    for (id, path) in &f.edge_paths {
        edge_paths.insert(id.clone(), g.image_walk(path)?);
    }
    Ok(CellularMap { src: f.src.clone(), dst: g.dst.clone(), cell_images, edge_paths })
}

/// Checks that every cell's stratum tag is preserved exactly: the image of
/// a cell tagged `i` is tagged `i`. Both complexes must be fully tagged.
pub fn check_stratum_preserving(map: &CellularMap) -> Result<ValidationReport> {
    let mut report = ValidationReport::new("stratum preservation");
    for (complex, side) in [(&map.src, "source"), (&map.dst, "target")] {
        if complex.cells.values().any(|c| c.stratum.is_none()) {
            return Err(Error::Invalid(format!("{side} complex is not stratified")));
        }
    }
    for (id, cell) in &map.src.cells {
        let Some(image) = map.cell_images.get(id) else {
            report.push("image", format!("no image for cell {id:?}"));
            continue;
        };
        let tag = cell.stratum.unwrap();
        let image_tag = map.dst.cells.get(image).and_then(|c| c.stratum);
        if image_tag != Some(tag) {
            report.push(
                "stratum",
                format!(
                    "cell {id:?} in stratum {tag} maps to {image:?} in stratum {}",
                    image_tag.map(|t| t.to_string()).unwrap_or_else(|| "?".into())
                ),
            );
        }
    }
    Ok(report)
}

/// Result of gluing `M` onto `X` along `h : A -> X`.
#[derive(Debug, Clone)]
pub struct Pushout {
    pub complex: CellComplex,
    /// Every `X`-cell survives; its quotient id is the least id among the
    /// `A`-cells identified with it and itself.
    pub x_to_q: BTreeMap<CellId, CellId>,
    /// Partial: `M`-cells that appear as cells of the quotient. All cells of
    /// `M` outside `A` do; an `A`-cell does exactly when `h` carries it
    /// homeomorphically onto a single `X`-cell.
    pub m_to_q: BTreeMap<CellId, CellId>,
    pub include_x: CellularMap,
    pub include_m: CellularMap,
}

/// Glues `M` onto `X` along the cellular map `h : A -> X`, where `A` is a
/// closed subcomplex of `M`. The quotient has the cells of `X` and the
/// cells of `M` outside `A`; boundaries of the latter are rewritten through
/// `h`. Quotient cells take the lexicographically least merged id;
/// surviving `M`-cell ids gain a trailing apostrophe when they collide with
/// a quotient id of `X`.
pub fn build_pushout(
    a: &BTreeSet<CellId>,
    m: &CellComplex,
    h: &CellularMap,
    x: &CellComplex,
) -> Result<Pushout> {
    if !m.is_closed_set(a) {
        return Err(Error::Invalid("A is not a closed subcomplex of M".into()));
    }
    let h_domain: BTreeSet<CellId> = h.src.cells.keys().cloned().collect();
    if &h_domain != a {
        return Err(Error::NotCellular(format!(
            "attaching map domain {:?} differs from A {:?}",
            h_domain, a
        )));
    }
    if !h.src.is_subcomplex_of(m) {
        return Err(Error::NotCellular("attaching map source disagrees with M on A".into()));
    }
    if !h.dst.is_subcomplex_of(x) {
        return Err(Error::NotCellular("attaching map target is not part of X".into()));
    }
    validate_cellular(h).into_result()?;

    // Identifications: A-cell onto an equal-dimensional X-cell it covers
    // exactly once.
    let mut merged: BTreeMap<CellId, BTreeSet<CellId>> = BTreeMap::new();
    for a_id in a {
        let cell = &m.cells[a_id];
        let image = &h.cell_images[a_id];
        let identified = match &cell.boundary {
            Boundary::Vertex => true,
            Boundary::Edge { .. } => h.edge_paths[a_id].len() == 1,
            Boundary::Face { walk } => {
                x.cells.get(image).map(|c| c.dim) == Some(2) && {
                    let Boundary::Face { walk: tw } = &x.cells[image].boundary else {
                        unreachable!("dim 2 cells carry walks")
                    };
                    let iw = free_reduce_cyclic(&h.image_walk(walk)?);
                    walk_wrap_degree(&free_reduce_cyclic(tw), &iw) == Some(1)
                }
            }
            Boundary::Facets { .. } => x.cells.get(image).map(|c| c.dim) == Some(cell.dim),
        };
        if identified {
            merged.entry(image.clone()).or_default().insert(a_id.clone());
        }
    }
    // Distinct X-cells can compute the same least merged id when an A-cell
    // shares its id string with an unrelated X-cell; sorted-order apostrophe
    // suffixes keep the assignment collision-free and deterministic.
    let mut x_to_q: BTreeMap<CellId, CellId> = BTreeMap::new();
    let mut q_ids: BTreeSet<CellId> = BTreeSet::new();
    for xid in x.cells.keys() {
        let mut least = xid.clone();
        if let Some(set) = merged.get(xid) {
            if let Some(first) = set.iter().next() {
                if first < &least {
                    least = first.clone();
                }
            }
        }
        while q_ids.contains(&least) {
            least.push('\'');
        }
        q_ids.insert(least.clone());
        x_to_q.insert(xid.clone(), least);
    }

    // Surviving M-cells, renamed away from quotient ids of X.
    let mut m_to_q: BTreeMap<CellId, CellId> = BTreeMap::new();
    let mut taken = q_ids.clone();
    for (id, _) in m.cells.iter().filter(|(id, _)| !a.contains(*id)) {
        let mut fresh = id.clone();
        while taken.contains(&fresh) {
            fresh.push('\'');
        }
        taken.insert(fresh.clone());
        m_to_q.insert(id.clone(), fresh);
    }
    for a_id in a {
        if let Some(image) = h.cell_images.get(a_id) {
            if merged.get(image).map(|s| s.contains(a_id)).unwrap_or(false) {
                m_to_q.insert(a_id.clone(), x_to_q[image].clone());
            }
        }
    }

    // Rewrites an M-boundary reference into the quotient.
    let rewrite_m_vertex = |v: &CellId| -> CellId {
        if a.contains(v) {
            x_to_q[&h.cell_images[v]].clone()
        } else {
            m_to_q[v].clone()
        }
    };
    let rewrite_m_step = |step: &Step| -> Vec<Step> {
        if a.contains(&step.edge) {
            let path = &h.edge_paths[&step.edge];
            let mapped: Vec<Step> = path
                .iter()
                .map(|s| Step { edge: x_to_q[&s.edge].clone(), reverse: s.reverse })
                .collect();
            if step.reverse {
                reverse_walk(&mapped)
            } else {
                mapped
            }
        } else {
            vec![Step { edge: m_to_q[&step.edge].clone(), reverse: step.reverse }]
        }
    };

    let mut complex = CellComplex::new();
    for (xid, cell) in &x.cells {
        let boundary = match &cell.boundary {
            Boundary::Vertex => Boundary::Vertex,
            Boundary::Edge { from, to } => {
                Boundary::Edge { from: x_to_q[from].clone(), to: x_to_q[to].clone() }
            }
            Boundary::Face { walk } => Boundary::Face {
                walk: walk
                    .iter()
                    .map(|s| Step { edge: x_to_q[&s.edge].clone(), reverse: s.reverse })
                    .collect(),
            },
            Boundary::Facets { facets } => {
                Boundary::Facets { facets: facets.iter().map(|f| x_to_q[f].clone()).collect() }
            }
        };
        complex.cells.insert(
            x_to_q[xid].clone(),
            Cell { dim: cell.dim, boundary, stratum: cell.stratum },
        );
    }
    for (mid, cell) in m.cells.iter().filter(|(id, _)| !a.contains(*id)) {
        let boundary = match &cell.boundary {
            Boundary::Vertex => Boundary::Vertex,
            Boundary::Edge { from, to } => {
                Boundary::Edge { from: rewrite_m_vertex(from), to: rewrite_m_vertex(to) }
            }
            Boundary::Face { walk } => {
                let rewritten: Vec<Step> = walk.iter().flat_map(|s| rewrite_m_step(s)).collect();
                if rewritten.is_empty() {
                    return Err(Error::Invalid(format!(
                        "2-cell {mid:?} attaches along a fully degenerate walk; such quotients are not representable"
                    )));
                }
                Boundary::Face { walk: rewritten }
            }
            Boundary::Facets { facets } => Boundary::Facets {
                facets: facets
                    .iter()
                    .filter_map(|f| {
                        if a.contains(f) {
                            let img = &h.cell_images[f];
                            // Facets that degenerate under h vanish from the
                            // facet set.
                            (x.cells[img].dim == m.cells[f].dim).then(|| x_to_q[img].clone())
                        } else {
                            Some(m_to_q[f].clone())
                        }
                    })
                    .collect(),
            },
        };
        complex.cells.insert(
            m_to_q[mid].clone(),
            Cell { dim: cell.dim, boundary, stratum: cell.stratum },
        );
    }

    let include_x = CellularMap {
        src: x.clone(),
        dst: complex.clone(),
        cell_images: x_to_q.clone(),
        edge_paths: x
            .cells_of_dim(1)
            .map(|(id, _)| (id.clone(), vec![Step::fwd(x_to_q[id].clone())]))
            .collect(),
    };
    let mut m_images: BTreeMap<CellId, CellId> = BTreeMap::new();
    let mut m_paths: BTreeMap<CellId, Vec<Step>> = BTreeMap::new();
    for (mid, cell) in &m.cells {
        let image = if let Some(q) = m_to_q.get(mid) {
            q.clone()
        } else {
            // A-cell that is not itself a quotient cell: carried by the
            // quotient image of its designated h-image.
            x_to_q[&h.cell_images[mid]].clone()
        };
        m_images.insert(mid.clone(), image);
        if cell.dim == 1 {
            let path = if a.contains(mid) {
                h.edge_paths[mid]
                    .iter()
                    .map(|s| Step { edge: x_to_q[&s.edge].clone(), reverse: s.reverse })
                    .collect()
            } else {
                vec![Step::fwd(m_to_q[mid].clone())]
            };
            m_paths.insert(mid.clone(), path);
        }
    }
    let include_m = CellularMap {
        src: m.clone(),
        dst: complex.clone(),
        cell_images: m_images,
        edge_paths: m_paths,
    };
    Ok(Pushout { complex, x_to_q, m_to_q, include_x, include_m })
}

/// One filtration layer: a pair `(M, A)` and its attaching map into the
/// complex assembled from the layers below.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layer {
    pub m: CellComplex,
    pub a: BTreeSet<CellId>,
    pub h: CellularMap,
}

/// A finite filtration presented by attachments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StratifiedSpace {
    pub base0: CellComplex,
    pub layers: Vec<Layer>,
}

impl StratifiedSpace {
    pub fn base_only(base0: CellComplex) -> Self {
        StratifiedSpace { base0, layers: Vec::new() }
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }
}

/// The assembled total complex of a stratified space, with enough id
/// bookkeeping to resolve layer data through the pushout identifications.
#[derive(Debug, Clone)]
pub struct Assembled {
    /// Total complex; every cell carries its stratum tag.
    pub total: CellComplex,
    /// Base cell id to total id.
    pub base_to_total: BTreeMap<CellId, CellId>,
    /// Per layer: `M`-cell id to total id, defined where the cell survives.
    pub layer_to_total: Vec<BTreeMap<CellId, CellId>>,
    /// Per stage `i` (the complex after attaching `i` layers): stage id to
    /// final id. The last entry is the identity.
    pub stage_to_total: Vec<BTreeMap<CellId, CellId>>,
    /// Total cell id to (stratum, original id in base0 or that layer's M).
    pub origin: BTreeMap<CellId, (usize, CellId)>,
}

impl Assembled {
    /// Total id of a base cell.
    pub fn base_cell(&self, id: &str) -> Result<&CellId> {
        self.base_to_total
            .get(id)
            .ok_or_else(|| Error::Invalid(format!("no base cell {id:?}")))
    }

    /// Total id of a layer-`i` cell (layers are 1-indexed by stratum).
    pub fn layer_cell(&self, stratum: usize, id: &str) -> Result<&CellId> {
        if stratum == 0 {
            return self.base_cell(id);
        }
        self.layer_to_total
            .get(stratum - 1)
            .and_then(|m| m.get(id))
            .ok_or_else(|| {
                Error::Invalid(format!("layer {stratum} cell {id:?} has no total counterpart"))
            })
    }

    /// Translates a stage-`i` id to the final total id.
    pub fn stage_cell(&self, stage: usize, id: &str) -> Result<&CellId> {
        self.stage_to_total
            .get(stage)
            .and_then(|m| m.get(id))
            .ok_or_else(|| Error::Invalid(format!("stage {stage} has no cell {id:?}")))
    }
}

/// Assembles the total complex by folding pushouts over the layers, tagging
/// base cells with stratum 0 and each layer's new cells with its level.
pub fn assemble(space: &StratifiedSpace) -> Result<Assembled> {
    space.base0.validate_complex().into_result()?;
    let mut total = space.base0.clone();
    for cell in total.cells.values_mut() {
        cell.stratum = Some(0);
    }
    let mut base_to_total: BTreeMap<CellId, CellId> =
        total.cells.keys().map(|id| (id.clone(), id.clone())).collect();
    let mut layer_to_total: Vec<BTreeMap<CellId, CellId>> = Vec::new();
    let mut stage_to_total: Vec<BTreeMap<CellId, CellId>> =
        vec![total.cells.keys().map(|id| (id.clone(), id.clone())).collect()];
    let mut origin: BTreeMap<CellId, (usize, CellId)> =
        total.cells.keys().map(|id| (id.clone(), (0, id.clone()))).collect();

    for (index, layer) in space.layers.iter().enumerate() {
        let level = index + 1;
        layer.m.validate_complex().into_result()?;
        let push = build_pushout(&layer.a, &layer.m, &layer.h, &total)?;
        let rename = |map: &mut BTreeMap<CellId, CellId>| {
            for v in map.values_mut() {
                *v = push.x_to_q[v.as_str()].clone();
            }
        };
        rename(&mut base_to_total);
        for m in &mut layer_to_total {
            rename(m);
        }
        for m in &mut stage_to_total {
            rename(m);
        }
        origin = origin
            .into_iter()
            .map(|(id, v)| (push.x_to_q[&id].clone(), v))
            .collect();
        let mut this_layer: BTreeMap<CellId, CellId> = BTreeMap::new();
        for (mid, q) in &push.m_to_q {
            this_layer.insert(mid.clone(), q.clone());
        }
        layer_to_total.push(this_layer);
        total = push.complex;
        for (mid, q) in &push.m_to_q {
            if !layer.a.contains(mid) {
                total.cells.get_mut(q).unwrap().stratum = Some(level);
                origin.insert(q.clone(), (level, mid.clone()));
            }
        }
        stage_to_total.push(total.cells.keys().map(|id| (id.clone(), id.clone())).collect());
    }
    Ok(Assembled { total, base_to_total, layer_to_total, stage_to_total, origin })
}

/// Presentation of the fundamental group of one component from its
/// 2-skeleton: generators are non-tree edges, relators come from 2-cell
/// boundary walks with tree edges dropped.
#[derive(Debug, Clone)]
pub struct Pi1Presentation {
    pub basepoint: CellId,
    pub tree_edges: BTreeSet<CellId>,
    pub generators: Vec<CellId>,
    /// Words over the generators; `true` marks an inverted occurrence.
    pub relators: Vec<Vec<(CellId, bool)>>,
}

/// Fundamental group presentation of the component containing a vertex.
pub fn pi1(complex: &CellComplex, component_vertex: &str) -> Result<Pi1Presentation> {
    let tree = complex.spanning_tree(component_vertex)?;
    let generators: Vec<CellId> = complex
        .cells_of_dim(1)
        .filter(|(id, cell)| {
            if tree.tree_edges.contains(*id) {
                return false;
            }
            match &cell.boundary {
                Boundary::Edge { from, .. } => tree.vertices.contains(from),
                _ => false,
            }
        })
        .map(|(id, _)| id.clone())
        .collect();
    let gen_set: BTreeSet<&CellId> = generators.iter().collect();
    let mut relators = Vec::new();
    for (_, cell) in complex.cells_of_dim(2) {
        let Boundary::Face { walk } = &cell.boundary else { continue };
        let Some(first) = walk.first() else { continue };
        let (start, _) = complex.step_endpoints(first)?;
        if !tree.vertices.contains(&start) {
            continue;
        }
        let word: Vec<(CellId, bool)> = walk
            .iter()
            .filter(|s| gen_set.contains(&s.edge))
            .map(|s| (s.edge.clone(), s.reverse))
            .collect();
        let reduced = reduce_word(&word);
        if !reduced.is_empty() {
            relators.push(reduced);
        }
    }
    Ok(Pi1Presentation { basepoint: tree.root, tree_edges: tree.tree_edges, generators, relators })
}

fn reduce_word(word: &[(CellId, bool)]) -> Vec<(CellId, bool)> {
    let mut stack: Vec<(CellId, bool)> = Vec::new();
    for w in word {
        if stack.last().map(|t| t.0 == w.0 && t.1 != w.1).unwrap_or(false) {
            stack.pop();
        } else {
            stack.push(w.clone());
        }
    }
    while stack.len() >= 2 {
        let first = stack.first().unwrap();
        let last = stack.last().unwrap();
        if first.0 == last.0 && first.1 != last.1 {
            stack.pop();
            stack.remove(0);
        } else {
            break;
        }
    }
    stack
}

/// The prism `base x I` of a complex of dimension at most 2, together with
/// the bottom and top inclusion maps. A cell `c` yields copies `c.0`,
/// `c.1`, and a side cell `c.01` of one higher dimension; stratum tags are
/// inherited from the base.
pub fn prism(base: &CellComplex) -> Result<(CellComplex, CellularMap, CellularMap)> {
    if base.max_dim() > 2 {
        return Err(Error::Invalid("prisms are built over complexes of dimension at most 2".into()));
    }
    let b = |id: &str| format!("{id}.0");
    let t = |id: &str| format!("{id}.1");
    let s = |id: &str| format!("{id}.01");
    let mut p = CellComplex::new();
    for (id, cell) in &base.cells {
        match &cell.boundary {
            Boundary::Vertex => {
                p.add_vertex(b(id));
                p.add_vertex(t(id));
                p.add_edge(s(id), b(id), t(id));
            }
            Boundary::Edge { from, to } => {
                p.add_edge(b(id), b(from), b(to));
                p.add_edge(t(id), t(from), t(to));
                p.add_face(
                    s(id),
                    vec![
                        Step::fwd(b(id)),
                        Step::fwd(s(to)),
                        Step::rev(t(id)),
                        Step::rev(s(from)),
                    ],
                );
            }
            Boundary::Face { walk } => {
                let copy = |suffix: &dyn Fn(&str) -> String| {
                    walk.iter()
                        .map(|st| Step { edge: suffix(&st.edge), reverse: st.reverse })
                        .collect::<Vec<_>>()
                };
                p.add_face(b(id), copy(&b));
                p.add_face(t(id), copy(&t));
                let mut facets: BTreeSet<CellId> = BTreeSet::from([b(id), t(id)]);
                for st in walk {
                    facets.insert(s(&st.edge));
                }
                p.add_solid(s(id), 3, facets);
            }
            Boundary::Facets { .. } => unreachable!("dimension capped at 2"),
        }
        for (copy_id, dims_up) in [(b(id), 0), (t(id), 0), (s(id), 1)] {
            let _ = dims_up;
            if let Some(c) = p.cells.get_mut(&copy_id) {
                c.stratum = cell.stratum;
            }
        }
    }
    let end_map = |suffix: &dyn Fn(&str) -> String| CellularMap {
        src: base.clone(),
        dst: p.clone(),
        cell_images: base.cells.keys().map(|id| (id.clone(), suffix(id))).collect(),
        edge_paths: base
            .cells_of_dim(1)
            .map(|(id, _)| (id.clone(), vec![Step::fwd(suffix(id))]))
            .collect(),
    };
    let bottom = end_map(&b);
    let top = end_map(&t);
    Ok((p, bottom, top))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{circle, disc_space, interval, point, square_disc};

    #[test]
    fn validate_accepts_standard_complexes() {
        for c in [circle(), interval(), square_disc()] {
            let report = c.validate_complex();
            assert!(report.is_valid(), "{report}");
        }
    }

    #[test]
    fn validate_rejects_broken_walks() {
        let mut c = square_disc();
        c.add_face("bad", vec![Step::fwd("s0"), Step::fwd("s2")]);
        let report = c.validate_complex();
        assert!(!report.is_valid());
        assert!(report.violations.iter().any(|v| v.rule == "walk"));
    }

    #[test]
    fn euler_characteristics() {
        assert_eq!(circle().euler_characteristic(), 0);
        assert_eq!(interval().euler_characteristic(), 1);
        assert_eq!(square_disc().euler_characteristic(), 1);
    }

    #[test]
    fn components_split_disjoint_pieces() {
        let mut c = circle();
        c.add_vertex("w");
        let comps = c.components();
        assert_eq!(comps.len(), 2);
        assert!(comps.contains_key("v"));
        assert!(comps.contains_key("w"));
    }

    #[test]
    fn free_reduction_cancels_backtracks() {
        let walk = vec![Step::fwd("a"), Step::fwd("b"), Step::rev("b"), Step::rev("a")];
        assert!(free_reduce_cyclic(&walk).is_empty());
        let cyclic = vec![Step::rev("a"), Step::fwd("b"), Step::fwd("a")];
        assert_eq!(free_reduce_cyclic(&cyclic), vec![Step::fwd("b")]);
    }

    #[test]
    fn wrap_degree_detects_rotations_reversals_and_powers() {
        let target = vec![Step::fwd("a"), Step::fwd("b")];
        assert_eq!(walk_wrap_degree(&target, &target), Some(1));
        let rotated = vec![Step::fwd("b"), Step::fwd("a")];
        assert_eq!(walk_wrap_degree(&target, &rotated), Some(1));
        let reversed = vec![Step::rev("b"), Step::rev("a")];
        assert_eq!(walk_wrap_degree(&target, &reversed), Some(1));
        let doubled = vec![Step::fwd("a"), Step::fwd("b"), Step::fwd("a"), Step::fwd("b")];
        assert_eq!(walk_wrap_degree(&target, &doubled), Some(2));
        let mismatched = vec![Step::fwd("a"), Step::rev("b")];
        assert_eq!(walk_wrap_degree(&target, &mismatched), None);
    }

    #[test]
    fn identity_map_is_cellular() {
        let c = square_disc();
        let id = CellularMap::identity(&c);
        let report = validate_cellular(&id);
        assert!(report.is_valid(), "{report}");
    }

    #[test]
    fn degree_two_circle_map_is_cellular() {
        let c = circle();
        let map = CellularMap::infer(
            &c,
            &c,
            BTreeMap::from([("v".into(), "v".into())]),
            BTreeMap::from([("e".into(), vec![Step::fwd("e"), Step::fwd("e")])]),
            BTreeMap::new(),
        )
        .unwrap();
        assert!(validate_cellular(&map).is_valid());
        assert_eq!(map.cell_images["e"], "e");
    }

    #[test]
    fn mismatched_endpoint_images_are_rejected() {
        let c = interval();
        let map = CellularMap {
            src: c.clone(),
            dst: c.clone(),
            cell_images: BTreeMap::from([
                ("p".into(), "p".into()),
                ("q".into(), "p".into()),
                ("i".into(), "i".into()),
            ]),
            edge_paths: BTreeMap::from([("i".into(), vec![Step::fwd("i")])]),
        };
        let report = validate_cellular(&map);
        assert!(!report.is_valid());
        assert!(report.violations.iter().any(|v| v.rule == "edge-path"));
    }

    #[test]
    fn pushout_of_interval_endpoints_gives_circle() {
        let m = interval();
        let a: BTreeSet<CellId> = ["p", "q"].into_iter().map(String::from).collect();
        let x = point("x");
        let h = CellularMap::infer(
            &m.subcomplex(&a).unwrap(),
            &x,
            BTreeMap::from([("p".into(), "x".into()), ("q".into(), "x".into())]),
            BTreeMap::new(),
            BTreeMap::new(),
        )
        .unwrap();
        let push = build_pushout(&a, &m, &h, &x).unwrap();
        assert_eq!(push.complex.dim_counts(), vec![1, 1]);
        assert_eq!(push.complex.euler_characteristic(), 0);
        assert!(push.complex.validate_complex().is_valid());
        assert!(validate_cellular(&push.include_x).is_valid());
        assert!(validate_cellular(&push.include_m).is_valid());
        // Both interval endpoints land on the single quotient vertex.
        assert_eq!(push.include_m.cell_images["p"], push.include_m.cell_images["q"]);
    }

    #[test]
    fn pushout_with_empty_a_is_disjoint_union() {
        let m = interval();
        let x = circle();
        let a = BTreeSet::new();
        let h = CellularMap {
            src: CellComplex::new(),
            dst: x.clone(),
            cell_images: BTreeMap::new(),
            edge_paths: BTreeMap::new(),
        };
        let push = build_pushout(&a, &m, &h, &x).unwrap();
        assert_eq!(push.complex.cells.len(), m.cells.len() + x.cells.len());
        assert_eq!(
            push.complex.euler_characteristic(),
            m.euler_characteristic() + x.euler_characteristic()
        );
    }

    #[test]
    fn pushout_renames_colliding_ids() {
        let m = interval();
        let mut x = point("p");
        x.add_vertex("z");
        let a: BTreeSet<CellId> = ["p"].into_iter().map(String::from).collect();
        let h = CellularMap::infer(
            &m.subcomplex(&a).unwrap(),
            &x,
            BTreeMap::from([("p".into(), "z".into())]),
            BTreeMap::new(),
            BTreeMap::new(),
        )
        .unwrap();
        let push = build_pushout(&a, &m, &h, &x).unwrap();
        // z merges with the A-vertex p, whose id collides with the distinct
        // X-vertex p; sorted-order assignment keeps p for the X-vertex and
        // disambiguates the merged class.
        assert_eq!(push.x_to_q["p"], "p");
        assert_eq!(push.x_to_q["z"], "p'");
        assert!(push.complex.cells.contains_key("p"));
        assert!(push.complex.cells.contains_key("p'"));
        assert!(push.complex.validate_complex().is_valid());
    }

    #[test]
    fn disc_assembly_tags_two_strata() {
        let assembled = assemble(&disc_space()).unwrap();
        assert_eq!(assembled.total.euler_characteristic(), 1);
        let tags: Vec<(CellId, usize)> = assembled
            .total
            .cells
            .iter()
            .map(|(id, c)| (id.clone(), c.stratum.unwrap()))
            .collect();
        let stratum0: Vec<_> = tags.iter().filter(|(_, t)| *t == 0).collect();
        let stratum1: Vec<_> = tags.iter().filter(|(_, t)| *t == 1).collect();
        assert_eq!(stratum0.len(), 2, "boundary keeps vertex and edge");
        assert_eq!(stratum1.len(), 1, "interior is the single 2-cell");
        // All four square corners resolve to the base vertex's total id.
        let v_total = assembled.base_cell("v").unwrap().clone();
        for p in ["p0", "p1", "p2", "p3"] {
            assert_eq!(assembled.layer_cell(1, p).unwrap(), &v_total);
        }
        assert!(assembled.layer_cell(1, "s1").is_err(), "collapsed side is no quotient cell");
    }

    #[test]
    fn assembly_euler_matches_inclusion_exclusion() {
        let space = disc_space();
        let assembled = assemble(&space).unwrap();
        let layer = &space.layers[0];
        let chi_a = layer.m.subcomplex(&layer.a).unwrap().euler_characteristic();
        assert_eq!(
            assembled.total.euler_characteristic(),
            layer.m.euler_characteristic() + space.base0.euler_characteristic() - chi_a
        );
    }

    #[test]
    fn attaching_layers_one_at_a_time_matches_batch() {
        // Two intervals attached to two points, batched as one layer versus
        // two successive pushouts.
        let mut x = CellComplex::new();
        x.add_vertex("x0").add_vertex("x1");
        let mut m_both = CellComplex::new();
        m_both.add_vertex("ya0").add_vertex("ya1").add_edge("i0", "ya0", "ya1");
        m_both.add_vertex("yb0").add_vertex("yb1").add_edge("i1", "yb0", "yb1");
        let a_both: BTreeSet<CellId> =
            ["ya0", "ya1", "yb0", "yb1"].into_iter().map(String::from).collect();
        let images: BTreeMap<CellId, CellId> = [
            ("ya0", "x0"),
            ("ya1", "x1"),
            ("yb0", "x0"),
            ("yb1", "x1"),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
        let h_both = CellularMap::infer(
            &m_both.subcomplex(&a_both).unwrap(),
            &x,
            images.clone(),
            BTreeMap::new(),
            BTreeMap::new(),
        )
        .unwrap();
        let batch = build_pushout(&a_both, &m_both, &h_both, &x).unwrap().complex;

        let mut step = x.clone();
        for (m_ids, edge) in [(["ya0", "ya1"], "i0"), (["yb0", "yb1"], "i1")] {
            let mut m = CellComplex::new();
            m.add_vertex(m_ids[0]).add_vertex(m_ids[1]).add_edge(edge, m_ids[0], m_ids[1]);
            let a: BTreeSet<CellId> = m_ids.iter().map(|s| s.to_string()).collect();
            let h = CellularMap::infer(
                &m.subcomplex(&a).unwrap(),
                &step,
                a.iter().map(|v| (v.clone(), images[v].clone())).collect(),
                BTreeMap::new(),
                BTreeMap::new(),
            )
            .unwrap();
            step = build_pushout(&a, &m, &h, &step).unwrap().complex;
        }
        assert_eq!(batch, step);
    }

    #[test]
    fn pi1_of_standard_spaces() {
        let p = pi1(&point("x"), "x").unwrap();
        assert!(p.generators.is_empty());

        let c = pi1(&circle(), "v").unwrap();
        assert_eq!(c.generators, vec!["e".to_string()]);
        assert!(c.relators.is_empty());

        let mut wedge = circle();
        wedge.add_edge("e2", "v", "v");
        let w = pi1(&wedge, "v").unwrap();
        assert_eq!(w.generators.len(), 2);
        assert!(w.relators.is_empty());

        let disc = assemble(&disc_space()).unwrap().total;
        let vertex = disc.cells_of_dim(0).next().unwrap().0.clone();
        let d = pi1(&disc, &vertex).unwrap();
        assert_eq!(d.generators.len(), 1);
        assert_eq!(d.relators.len(), 1, "the 2-cell kills the generator");
    }

    #[test]
    fn pi1_generator_count_is_euler_count() {
        for c in [circle(), interval(), square_disc()] {
            let comps = c.components();
            let e = c.cells_of_dim(1).count() as i64;
            let v = c.cells_of_dim(0).count() as i64;
            let gens: i64 = comps
                .keys()
                .map(|k| pi1(&c, k).unwrap().generators.len() as i64)
                .sum();
            assert_eq!(gens, e - v + comps.len() as i64);
        }
    }

    #[test]
    fn stratum_preservation_detects_violations() {
        let assembled = assemble(&disc_space()).unwrap();
        let total = assembled.total;
        let id = CellularMap::identity(&total);
        assert!(check_stratum_preserving(&id).unwrap().is_valid());

        // Collapse the interior onto the boundary: stratum 1 cell maps to a
        // stratum 0 cell.
        let vertex = total.cells_of_dim(0).next().unwrap().0.clone();
        let edge = total.cells_of_dim(1).next().unwrap().0.clone();
        let face = total.cells_of_dim(2).next().unwrap().0.clone();
        let collapse = CellularMap {
            src: total.clone(),
            dst: total.clone(),
            cell_images: BTreeMap::from([
                (vertex.clone(), vertex.clone()),
                (edge.clone(), vertex.clone()),
                (face.clone(), vertex.clone()),
            ]),
            edge_paths: BTreeMap::from([(edge.clone(), vec![])]),
        };
        let report = check_stratum_preserving(&collapse).unwrap();
        assert!(!report.is_valid());
        assert!(report.violations.iter().any(|v| v.detail.contains("stratum 1")));
    }

    #[test]
    fn prism_of_circle_has_two_ends_and_a_side() {
        let (p, bottom, top) = prism(&circle()).unwrap();
        assert!(p.validate_complex().is_valid());
        assert_eq!(p.dim_counts(), vec![2, 3, 1]);
        assert_eq!(p.euler_characteristic(), 0);
        assert!(validate_cellular(&bottom).is_valid());
        assert!(validate_cellular(&top).is_valid());
        assert_eq!(bottom.cell_images["e"], "e.0");
        assert_eq!(top.cell_images["e"], "e.1");
    }

    #[test]
    fn prism_of_disc_reaches_dimension_three() {
        let disc = assemble(&disc_space()).unwrap().total;
        let (p, bottom, _) = prism(&disc).unwrap();
        assert!(p.validate_complex().is_valid());
        assert_eq!(p.max_dim(), 3);
        assert!(validate_cellular(&bottom).is_valid());
        // Prism stratum tags are inherited, so the end inclusions preserve
        // strata.
        assert!(check_stratum_preserving(&bottom).unwrap().is_valid());
    }

    #[test]
    fn compose_cellular_chains_paths() {
        let c = circle();
        let deg2 = CellularMap::infer(
            &c,
            &c,
            BTreeMap::from([("v".into(), "v".into())]),
            BTreeMap::from([("e".into(), vec![Step::fwd("e"), Step::fwd("e")])]),
            BTreeMap::new(),
        )
        .unwrap();
        let deg4 = compose_cellular(&deg2, &deg2).unwrap();
        assert_eq!(deg4.edge_paths["e"].len(), 4);
        assert!(validate_cellular(&deg4).is_valid());
    }
}
