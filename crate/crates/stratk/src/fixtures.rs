//! Small reference complexes, spaces, and bundles shared by tests, the
//! bundled corpus, and the command-line `check` verb.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::bundle::VBundle;
use crate::complex::{CellComplex, CellId, CellularMap, Layer, Step, StratifiedSpace};
use crate::lincat::{Mor, Obj, StructureCategory};
use crate::matrix::QMat;

pub fn point(id: &str) -> CellComplex {
    let mut c = CellComplex::new();
    c.add_vertex(id);
    c
}

pub fn interval() -> CellComplex {
    let mut c = CellComplex::new();
    c.add_vertex("p").add_vertex("q").add_edge("i", "p", "q");
    c
}

/// One vertex, one loop edge.
pub fn circle() -> CellComplex {
    let mut c = CellComplex::new();
    c.add_vertex("v").add_edge("e", "v", "v");
    c
}

/// Two vertices, two edges running around the same circle.
pub fn subdivided_circle() -> CellComplex {
    let mut c = CellComplex::new();
    c.add_vertex("u").add_vertex("w").add_edge("a", "u", "w").add_edge("b", "w", "u");
    c
}

/// A square 2-cell with its four corners and sides.
pub fn square_disc() -> CellComplex {
    let mut c = CellComplex::new();
    for v in ["p0", "p1", "p2", "p3"] {
        c.add_vertex(v);
    }
    c.add_edge("s0", "p0", "p1");
    c.add_edge("s1", "p1", "p2");
    c.add_edge("s2", "p2", "p3");
    c.add_edge("s3", "p3", "p0");
    c.add_face(
        "f",
        vec![Step::fwd("s0"), Step::fwd("s1"), Step::fwd("s2"), Step::fwd("s3")],
    );
    c
}

/// A disc presented with two strata: a circle base and a square 2-layer
/// whose boundary wraps the circle once (three sides collapse to the
/// vertex, one side wraps the loop).
pub fn disc_space() -> StratifiedSpace {
    let base = circle();
    let m = square_disc();
    let a: BTreeSet<CellId> = ["p0", "p1", "p2", "p3", "s0", "s1", "s2", "s3"]
        .into_iter()
        .map(String::from)
        .collect();
    let h = CellularMap::infer(
        &m.subcomplex(&a).expect("square boundary is closed"),
        &base,
        ["p0", "p1", "p2", "p3"]
            .into_iter()
            .map(|v| (v.to_string(), "v".to_string()))
            .collect(),
        BTreeMap::from([
            ("s0".to_string(), vec![Step::fwd("e")]),
            ("s1".to_string(), vec![]),
            ("s2".to_string(), vec![]),
            ("s3".to_string(), vec![]),
        ]),
        BTreeMap::new(),
    )
    .expect("boundary wrap is cellular");
    StratifiedSpace { base0: base, layers: vec![Layer { m, a, h }] }
}

/// A circle bundle with the given holonomy label on the single edge.
pub fn circle_bundle(category: Arc<StructureCategory>, label: Mor) -> VBundle {
    let dim = label.src().dim;
    VBundle {
        base: circle(),
        category,
        fiber: BTreeMap::from([(String::from("v"), Obj::new(dim))]),
        labels: BTreeMap::from([(String::from("e"), label)]),
    }
}

/// The Moebius line bundle: holonomy (-1) around the circle.
pub fn mobius_bundle() -> VBundle {
    circle_bundle(
        Arc::new(StructureCategory::signed_perm(1)),
        Mor::new(QMat::from_i64(&[&[-1]])),
    )
}

/// The self-map of the circle wrapping the loop `degree` times.
pub fn circle_self_map(degree: usize) -> CellularMap {
    let base = circle();
    CellularMap {
        src: base.clone(),
        dst: base,
        cell_images: BTreeMap::from([
            (String::from("v"), String::from("v")),
            (String::from("e"), String::from("e")),
        ]),
        edge_paths: BTreeMap::from([(
            String::from("e"),
            vec![Step::fwd("e"); degree],
        )]),
    }
}

/// A cylinder: two rim loops joined by a seam, filled by one square.
pub fn cylinder() -> CellComplex {
    let mut c = CellComplex::new();
    c.add_vertex("q0").add_vertex("q1");
    c.add_edge("rim0", "q0", "q0");
    c.add_edge("rim1", "q1", "q1");
    c.add_edge("seam", "q0", "q1");
    c.add_face(
        "c",
        vec![Step::fwd("rim0"), Step::fwd("seam"), Step::rev("rim1"), Step::rev("seam")],
    );
    c
}

/// An annulus presented with two strata: a circle base and a cylinder
/// layer whose inner rim wraps the circle once.
pub fn annulus_space() -> StratifiedSpace {
    let base = circle();
    let m = cylinder();
    let a: BTreeSet<CellId> = ["q0", "rim0"].into_iter().map(String::from).collect();
    let h = CellularMap::infer(
        &m.subcomplex(&a).expect("inner rim is closed"),
        &base,
        BTreeMap::from([("q0".to_string(), "v".to_string())]),
        BTreeMap::from([("rim0".to_string(), vec![Step::fwd("e")])]),
        BTreeMap::new(),
    )
    .expect("rim wrap is cellular");
    StratifiedSpace { base0: base, layers: vec![Layer { m, a, h }] }
}

fn annulus_model(core_label: i64) -> crate::strata::StratifiedBundle {
    let category = Arc::new(StructureCategory::signed_perm(1));
    let space = annulus_space();
    let layer0 = circle_bundle(category.clone(), Mor::new(QMat::from_i64(&[&[core_label]])));
    let label = |s: i64| Mor::new(QMat::from_i64(&[&[s]]));
    let m_bundle = VBundle {
        base: space.layers[0].m.clone(),
        category,
        fiber: BTreeMap::from([(String::from("q0"), Obj::new(1))]),
        labels: BTreeMap::from([
            (String::from("rim0"), label(core_label)),
            (String::from("rim1"), label(core_label)),
            (String::from("seam"), label(1)),
        ]),
    };
    let attach = crate::strata::AttachingVMap::new(
        &m_bundle,
        &space.layers[0].a,
        space.layers[0].h.clone(),
        BTreeMap::from([(String::from("q0"), Mor::identity(1))]),
    )
    .expect("inner rim restricts");
    crate::strata::build_stratified(space, layer0, vec![(m_bundle, attach)])
        .expect("rim labels are natural over the core")
}

/// Annulus model with trivial holonomy everywhere.
pub fn flat_annulus_model() -> crate::strata::StratifiedBundle {
    annulus_model(1)
}

/// Annulus model with Moebius holonomy around the core circle.
pub fn mobius_annulus_model() -> crate::strata::StratifiedBundle {
    annulus_model(-1)
}

/// Disc model with a rank-1 boundary stratum, a rank-2 interior layer, and
/// a surjective rank-dropping attach, over the open category of all
/// matrices.
pub fn disc_tangent_model() -> crate::strata::StratifiedBundle {
    let category = Arc::new(StructureCategory::vect_open(2));
    let space = disc_space();
    let layer0 = circle_bundle(category.clone(), Mor::identity(1));
    let m_bundle = VBundle::trivial(space.layers[0].m.clone(), category, 2)
        .expect("square supports a trivial bundle");
    let projection = Mor::new(QMat::from_i64(&[&[1, 0]]));
    let attach = crate::strata::AttachingVMap::new(
        &m_bundle,
        &space.layers[0].a,
        space.layers[0].h.clone(),
        ["p0", "p1", "p2", "p3"]
            .into_iter()
            .map(|v| (v.to_string(), projection.clone()))
            .collect(),
    )
    .expect("square boundary restricts");
    crate::strata::build_stratified(space, layer0, vec![(m_bundle, attach)])
        .expect("constant projections are natural")
}

fn poly_cell(dim: usize, level: usize, vertices: &[&str], basis: QMat) -> crate::tangent::PolyCell {
    crate::tangent::PolyCell {
        dim,
        vertices: vertices.iter().map(|s| s.to_string()).collect(),
        level,
        basis,
    }
}

fn int_coords(xs: &[i64]) -> Vec<crate::matrix::Q> {
    xs.iter().map(|&n| crate::matrix::qi(n)).collect()
}

/// Unit segment stratified by its endpoints.
pub fn segment_manifold() -> crate::tangent::PolytopalManifold {
    crate::tangent::PolytopalManifold {
        ambient_dim: 1,
        coords: BTreeMap::from([
            ("s0".to_string(), int_coords(&[0])),
            ("s1".to_string(), int_coords(&[1])),
        ]),
        cells: BTreeMap::from([
            ("s0".to_string(), poly_cell(0, 0, &["s0"], QMat::zero(1, 0))),
            ("s1".to_string(), poly_cell(0, 0, &["s1"], QMat::zero(1, 0))),
            ("seg".to_string(), poly_cell(1, 1, &["s0", "s1"], QMat::from_i64(&[&[1]]))),
        ]),
    }
}

/// Unit square attached along one side to a closed interval stratum; the
/// other three sides are free boundary of the square stratum.
pub fn flap_manifold() -> crate::tangent::PolytopalManifold {
    let col = |x: i64, y: i64| QMat::from_i64(&[&[x], &[y]]);
    crate::tangent::PolytopalManifold {
        ambient_dim: 2,
        coords: BTreeMap::from([
            ("a".to_string(), int_coords(&[0, 0])),
            ("b".to_string(), int_coords(&[1, 0])),
            ("c".to_string(), int_coords(&[1, 1])),
            ("d".to_string(), int_coords(&[0, 1])),
        ]),
        cells: BTreeMap::from([
            ("a".to_string(), poly_cell(0, 0, &["a"], QMat::zero(2, 0))),
            ("b".to_string(), poly_cell(0, 0, &["b"], QMat::zero(2, 0))),
            ("c".to_string(), poly_cell(0, 1, &["c"], QMat::zero(2, 0))),
            ("d".to_string(), poly_cell(0, 1, &["d"], QMat::zero(2, 0))),
            ("ab".to_string(), poly_cell(1, 0, &["a", "b"], col(1, 0))),
            ("bc".to_string(), poly_cell(1, 1, &["b", "c"], col(0, 1))),
            ("cd".to_string(), poly_cell(1, 1, &["c", "d"], col(1, 0))),
            ("da".to_string(), poly_cell(1, 1, &["d", "a"], col(0, 1))),
            (
                "sq".to_string(),
                poly_cell(2, 1, &["a", "b", "c", "d"], QMat::identity(2)),
            ),
        ]),
    }
}

/// Solid unit cube stratified by skeleta: vertices, edges, squares, body.
pub fn cube_manifold() -> crate::tangent::PolytopalManifold {
    let axis = |i: usize| {
        let mut m = QMat::zero(3, 1);
        m.set(i, 0, crate::matrix::qi(1));
        m
    };
    let plane = |i: usize, j: usize| {
        let mut m = QMat::zero(3, 2);
        m.set(i, 0, crate::matrix::qi(1));
        m.set(j, 1, crate::matrix::qi(1));
        m
    };
    let mut coords = BTreeMap::new();
    let mut cells = BTreeMap::new();
    for x in 0..2i64 {
        for y in 0..2i64 {
            for z in 0..2i64 {
                let id = format!("v{x}{y}{z}");
                coords.insert(id.clone(), int_coords(&[x, y, z]));
                cells.insert(id.clone(), poly_cell(0, 0, &[&id], QMat::zero(3, 0)));
            }
        }
    }
    let mut edge = |id: &str, u: &str, w: &str, ax: usize| {
        cells.insert(id.to_string(), poly_cell(1, 1, &[u, w], axis(ax)));
    };
    edge("ex00", "v000", "v100", 0);
    edge("ex01", "v001", "v101", 0);
    edge("ex10", "v010", "v110", 0);
    edge("ex11", "v011", "v111", 0);
    edge("ey00", "v000", "v010", 1);
    edge("ey10", "v100", "v110", 1);
    edge("ey01", "v001", "v011", 1);
    edge("ey11", "v101", "v111", 1);
    edge("ez00", "v000", "v001", 2);
    edge("ez10", "v100", "v101", 2);
    edge("ez01", "v010", "v011", 2);
    edge("ez11", "v110", "v111", 2);
    let mut face = |id: &str, verts: &[&str; 4], i: usize, j: usize| {
        cells.insert(id.to_string(), poly_cell(2, 2, verts, plane(i, j)));
    };
    face("fx0", &["v000", "v010", "v011", "v001"], 1, 2);
    face("fx1", &["v100", "v110", "v111", "v101"], 1, 2);
    face("fy0", &["v000", "v100", "v101", "v001"], 0, 2);
    face("fy1", &["v010", "v110", "v111", "v011"], 0, 2);
    face("fz0", &["v000", "v100", "v110", "v010"], 0, 1);
    face("fz1", &["v001", "v101", "v111", "v011"], 0, 1);
    let all_vertices: Vec<&str> = [
        "v000", "v001", "v010", "v011", "v100", "v101", "v110", "v111",
    ]
    .to_vec();
    cells.insert(
        "cube".to_string(),
        poly_cell(3, 3, &all_vertices, QMat::identity(3)),
    );
    crate::tangent::PolytopalManifold { ambient_dim: 3, coords, cells }
}

/// Disc model with rank-1 fibers and trivial holonomy on both strata.
pub fn flat_disc_model() -> crate::strata::StratifiedBundle {
    let category = Arc::new(StructureCategory::signed_perm(1));
    let space = disc_space();
    let layer0 = circle_bundle(category.clone(), Mor::identity(1));
    let m_bundle = VBundle::trivial(space.layers[0].m.clone(), category, 1)
        .expect("square supports a trivial bundle");
    let attach = crate::strata::AttachingVMap::new(
        &m_bundle,
        &space.layers[0].a,
        space.layers[0].h.clone(),
        ["p0", "p1", "p2", "p3"]
            .into_iter()
            .map(|v| (v.to_string(), Mor::identity(1)))
            .collect(),
    )
    .expect("square boundary restricts");
    crate::strata::build_stratified(space, layer0, vec![(m_bundle, attach)])
        .expect("identity attaches are natural")
}

/// Annulus model over the given open category: trivial holonomy, with the
/// attach at the inner-rim vertex scaling by `attach_scale`.
pub fn scaled_annulus_model(
    category: Arc<StructureCategory>,
    attach_scale: i64,
) -> crate::strata::StratifiedBundle {
    let space = annulus_space();
    let layer0 = circle_bundle(category.clone(), Mor::identity(1));
    let m_bundle = VBundle::trivial(space.layers[0].m.clone(), category, 1)
        .expect("cylinder supports a trivial bundle");
    let attach = crate::strata::AttachingVMap::new(
        &m_bundle,
        &space.layers[0].a,
        space.layers[0].h.clone(),
        BTreeMap::from([(
            String::from("q0"),
            Mor::new(QMat::from_i64(&[&[attach_scale]])),
        )]),
    )
    .expect("inner rim restricts");
    crate::strata::build_stratified(space, layer0, vec![(m_bundle, attach)])
        .expect("trivial rim holonomy is natural under any vertex scale")
}

/// A two-layer tower: a point, an interval whose ends both attach to the
/// point (a circle after one stage), then a square wrapping that circle.
pub fn tower_space() -> StratifiedSpace {
    let base = point("pt");
    let m1 = interval();
    let a1: BTreeSet<CellId> = ["p", "q"].into_iter().map(String::from).collect();
    let h1 = CellularMap::infer(
        &m1.subcomplex(&a1).expect("interval ends are closed"),
        &base,
        [("p", "pt"), ("q", "pt")]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect(),
        BTreeMap::new(),
        BTreeMap::new(),
    )
    .expect("collapsing both ends is cellular");
    let layer1 = Layer { m: m1, a: a1, h: h1 };
    let stage1 = crate::complex::assemble(&StratifiedSpace {
        base0: base.clone(),
        layers: vec![layer1.clone()],
    })
    .expect("interval ends glue onto the point");
    let hub = stage1.total.cells_of_dim(0).next().expect("stage has a vertex").0.clone();
    let loop_edge = stage1.total.cells_of_dim(1).next().expect("stage has an edge").0.clone();
    let m2 = square_disc();
    let a2: BTreeSet<CellId> = ["p0", "p1", "p2", "p3", "s0", "s1", "s2", "s3"]
        .into_iter()
        .map(String::from)
        .collect();
    let h2 = CellularMap::infer(
        &m2.subcomplex(&a2).expect("square boundary is closed"),
        &stage1.total,
        ["p0", "p1", "p2", "p3"]
            .into_iter()
            .map(|v| (v.to_string(), hub.clone()))
            .collect(),
        BTreeMap::from([
            ("s0".to_string(), vec![Step::fwd(loop_edge)]),
            ("s1".to_string(), vec![]),
            ("s2".to_string(), vec![]),
            ("s3".to_string(), vec![]),
        ]),
        BTreeMap::new(),
    )
    .expect("boundary wrap is cellular");
    StratifiedSpace { base0: base, layers: vec![layer1, Layer { m: m2, a: a2, h: h2 }] }
}

/// Rank-1 bundle on the two-layer tower with identity labels and attaches.
pub fn tower_model() -> crate::strata::StratifiedBundle {
    let category = Arc::new(StructureCategory::signed_perm(1));
    let space = tower_space();
    let layer0 = VBundle::trivial(space.base0.clone(), category.clone(), 1)
        .expect("point supports a trivial bundle");
    let m1 = VBundle::trivial(space.layers[0].m.clone(), category.clone(), 1)
        .expect("interval supports a trivial bundle");
    let attach1 = crate::strata::AttachingVMap::new(
        &m1,
        &space.layers[0].a,
        space.layers[0].h.clone(),
        [("p", Mor::identity(1)), ("q", Mor::identity(1))]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
    )
    .expect("interval ends restrict");
    let m2 = VBundle::trivial(space.layers[1].m.clone(), category, 1)
        .expect("square supports a trivial bundle");
    let attach2 = crate::strata::AttachingVMap::new(
        &m2,
        &space.layers[1].a,
        space.layers[1].h.clone(),
        ["p0", "p1", "p2", "p3"]
            .into_iter()
            .map(|v| (v.to_string(), Mor::identity(1)))
            .collect(),
    )
    .expect("square boundary restricts");
    crate::strata::build_stratified(space, layer0, vec![(m1, attach1), (m2, attach2)])
        .expect("identity attaches are natural across both layers")
}

/// One corpus entry for the flatten dichotomy: a stratified bundle and
/// whether collapsing it to a flat cocycle must succeed.
pub struct FlattenCase {
    pub name: &'static str,
    pub bundle: crate::strata::StratifiedBundle,
    pub expect_flat: bool,
}

/// Bundled dichotomy corpus: every model with invertible attaches must
/// flatten, every rank-dropping or collapsing attach must be rejected.
pub fn flatten_corpus() -> Vec<FlattenCase> {
    let case = |name, bundle, expect_flat| FlattenCase { name, bundle, expect_flat };
    vec![
        case("flat-annulus", flat_annulus_model(), true),
        case("mobius-annulus", mobius_annulus_model(), true),
        case("flat-disc", flat_disc_model(), true),
        case(
            "mobius-circle",
            crate::strata::StratifiedBundle::one_stratum(mobius_bundle()),
            true,
        ),
        case(
            "gl-doubled-annulus",
            scaled_annulus_model(Arc::new(StructureCategory::gl_open(2)), 2),
            true,
        ),
        case(
            "vect-doubled-annulus",
            scaled_annulus_model(Arc::new(StructureCategory::vect_open(2)), 2),
            true,
        ),
        case("flat-tower", tower_model(), true),
        case("disc-tangent", disc_tangent_model(), false),
        case(
            "segment-tangent",
            crate::tangent::build_tangent(&segment_manifold())
                .expect("segment tangent assembles"),
            false,
        ),
        case(
            "flap-tangent",
            crate::tangent::build_tangent(&flap_manifold()).expect("flap tangent assembles"),
            false,
        ),
        case(
            "cube-tangent",
            crate::tangent::build_tangent(&cube_manifold()).expect("cube tangent assembles"),
            false,
        ),
        case(
            "vect-collapsed-annulus",
            scaled_annulus_model(Arc::new(StructureCategory::vect_open(2)), 0),
            false,
        ),
    ]
}

/// One seeded instance for the algebraic-law checks: a composable pair of
/// morphisms, a functor, three bundles over one base whose ranks keep sums
/// and tensor products inside the rank-4 window, and a self-map of the
/// base to pull back along.
pub struct LawInstance {
    pub seed: u64,
    pub category: Arc<StructureCategory>,
    pub f: Mor,
    pub g: Mor,
    pub functor: crate::lincat::MatrixFunctor,
    pub y1: VBundle,
    pub y2: VBundle,
    pub y3: VBundle,
    pub base_map: CellularMap,
}

/// Deterministic law instance for a seed, over signed permutations up to
/// rank 4.
pub fn law_instance(seed: u64) -> LawInstance {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let category = Arc::new(StructureCategory::signed_perm(4));
    let rules = [
        crate::lincat::FunctorRule::Identity,
        crate::lincat::FunctorRule::DualInverseTranspose,
        crate::lincat::FunctorRule::Determinant,
        crate::lincat::FunctorRule::ZeroObject,
        crate::lincat::FunctorRule::TensorByObject(2),
    ];
    let rule = rules[rng.gen_range(0..rules.len())].clone();
    // Tensoring by R^2 doubles dimensions, so the pair must stay at rank 2
    // or below to land inside the window.
    let pair_dim = if matches!(rule, crate::lincat::FunctorRule::TensorByObject(_)) {
        rng.gen_range(1..=2)
    } else {
        rng.gen_range(1..=4)
    };
    let pair_autos = category.automorphisms(pair_dim).expect("finite category enumerates");
    let f = pair_autos[rng.gen_range(0..pair_autos.len())].clone();
    let g = pair_autos[rng.gen_range(0..pair_autos.len())].clone();
    let functor =
        crate::lincat::MatrixFunctor::new("law-functor", category.clone(), category.clone(), rule);
    // r1 + r2 + r3 <= 4 and r1 * (r2 + r3) <= 4 keep double sums and the
    // distributivity products inside the window.
    let ranks = [[1, 1, 1], [1, 1, 2], [1, 2, 1], [2, 1, 1]][rng.gen_range(0..4)];
    let (base, key, edge_ids): (CellComplex, &str, Vec<&str>) = if rng.gen_bool(0.5) {
        (circle(), "v", vec!["e"])
    } else {
        (subdivided_circle(), "u", vec!["a", "b"])
    };
    let random_bundle = |rank: usize, rng: &mut rand_chacha::ChaCha8Rng| -> VBundle {
        let autos = category.automorphisms(rank).expect("finite category enumerates");
        VBundle {
            base: base.clone(),
            category: category.clone(),
            fiber: BTreeMap::from([(key.to_string(), Obj::new(rank))]),
            labels: edge_ids
                .iter()
                .map(|e| (e.to_string(), autos[rng.gen_range(0..autos.len())].clone()))
                .collect(),
        }
    };
    let y1 = random_bundle(ranks[0], &mut rng);
    let y2 = random_bundle(ranks[1], &mut rng);
    let y3 = random_bundle(ranks[2], &mut rng);
    let base_map = if edge_ids.len() == 1 {
        circle_self_map(rng.gen_range(1..=3))
    } else {
        // Rotation of the subdivided circle: swap the vertices, advance
        // each edge to the next one around.
        CellularMap {
            src: base.clone(),
            dst: base.clone(),
            cell_images: BTreeMap::from([
                ("u".to_string(), "w".to_string()),
                ("w".to_string(), "u".to_string()),
                ("a".to_string(), "b".to_string()),
                ("b".to_string(), "a".to_string()),
            ]),
            edge_paths: BTreeMap::from([
                ("a".to_string(), vec![Step::fwd("b")]),
                ("b".to_string(), vec![Step::fwd("a")]),
            ]),
        }
    };
    LawInstance { seed, category, f, g, functor, y1, y2, y3, base_map }
}

/// Checks the algebraic laws on one instance: the functor preserves
/// composition exactly, direct sums commute and associate up to witnessed
/// isomorphism, the tensor product distributes over sums up to witnessed
/// isomorphism, and pullback commutes with direct sums.
pub fn law_report(inst: &LawInstance) -> crate::report::ValidationReport {
    use crate::bundle::{is_isomorphic, pullback_bundle};
    use crate::functorial::map_bundle2;
    use crate::lincat::{apply_functor, compose, BifunctorRule, MatrixBifunctor};
    let mut report = crate::report::ValidationReport::new(format!("laws seed {}", inst.seed));
    let bifunctor = |name: &str, rule| {
        MatrixBifunctor::new(
            name,
            inst.category.clone(),
            inst.category.clone(),
            inst.category.clone(),
            rule,
        )
    };
    let oplus = bifunctor("oplus", BifunctorRule::DirectSum);
    let otimes = bifunctor("otimes", BifunctorRule::Tensor);
    let composition_law = || -> crate::error::Result<bool> {
        let fg = compose(&inst.f, &inst.g)?;
        let lhs = apply_functor(&inst.functor, &fg)?;
        let rhs = compose(
            &apply_functor(&inst.functor, &inst.f)?,
            &apply_functor(&inst.functor, &inst.g)?,
        )?;
        Ok(lhs == rhs)
    };
    match composition_law() {
        Ok(true) => {}
        Ok(false) => report.push(
            "functor-composition",
            "the image of the composite differs from the composite of the images".to_string(),
        ),
        Err(e) => report.push("functor-composition", e.to_string()),
    }
    let mut expect_iso = |rule: &str,
                          lhs: crate::error::Result<VBundle>,
                          rhs: crate::error::Result<VBundle>| {
        match (lhs, rhs) {
            (Ok(a), Ok(b)) => match is_isomorphic(&a, &b) {
                Ok(Some(_)) => {}
                Ok(None) => report.push(rule, "the two sides are not isomorphic".to_string()),
                Err(e) => report.push(rule, e.to_string()),
            },
            (Err(e), _) | (_, Err(e)) => report.push(rule, e.to_string()),
        }
    };
    expect_iso(
        "sum-commutativity",
        map_bundle2(&oplus, &inst.y1, &inst.y2),
        map_bundle2(&oplus, &inst.y2, &inst.y1),
    );
    expect_iso(
        "sum-associativity",
        map_bundle2(&oplus, &inst.y1, &inst.y2).and_then(|s| map_bundle2(&oplus, &s, &inst.y3)),
        map_bundle2(&oplus, &inst.y2, &inst.y3).and_then(|s| map_bundle2(&oplus, &inst.y1, &s)),
    );
    expect_iso(
        "tensor-distributivity",
        map_bundle2(&oplus, &inst.y2, &inst.y3).and_then(|s| map_bundle2(&otimes, &inst.y1, &s)),
        map_bundle2(&otimes, &inst.y1, &inst.y2).and_then(|a| {
            map_bundle2(&otimes, &inst.y1, &inst.y3)
                .and_then(|b| map_bundle2(&oplus, &a, &b))
        }),
    );
    expect_iso(
        "pullback-additivity",
        map_bundle2(&oplus, &inst.y1, &inst.y2)
            .and_then(|s| pullback_bundle(&inst.base_map, &s)),
        pullback_bundle(&inst.base_map, &inst.y1).and_then(|a| {
            pullback_bundle(&inst.base_map, &inst.y2)
                .and_then(|b| map_bundle2(&oplus, &a, &b))
        }),
    );
    report
}

/// Checks one homotopy case: the homotopy is cellular and stratum
/// preserving, and the pullbacks along its two end maps are isomorphic
/// with an explicit witness.
pub fn homotopy_report(case: &HomotopyCase) -> crate::report::ValidationReport {
    let mut report =
        crate::report::ValidationReport::new(format!("homotopy {}", case.name));
    let cellular = crate::complex::validate_cellular(&case.homotopy);
    for v in &cellular.violations {
        report.push("cellular", format!("{}: {}", v.rule, v.detail));
    }
    match crate::complex::check_stratum_preserving(&case.homotopy) {
        Ok(r) => {
            for v in &r.violations {
                report.push("strata", format!("{}: {}", v.rule, v.detail));
            }
        }
        Err(e) => report.push("strata", e.to_string()),
    }
    let ends = || -> crate::error::Result<crate::bundle::IsoOutcome<crate::strata::StratifiedGauge>> {
        let src_total = crate::complex::assemble(&case.src_space)?.total;
        let (f0, f1) = crate::strata::homotopy_end_maps(&case.homotopy, &src_total)?;
        let x0 = crate::strata::pullback_stratified(&case.src_space, &f0, &case.x_prime)?;
        let x1 = crate::strata::pullback_stratified(&case.src_space, &f1, &case.x_prime)?;
        crate::strata::is_isomorphic_stratified(&x0, &x1)
    };
    match ends() {
        Ok(crate::bundle::IsoOutcome::Witness(_)) => {}
        Ok(crate::bundle::IsoOutcome::NoIso { reason }) => {
            report.push("end-maps", format!("end-map pullbacks are not isomorphic: {reason}"));
        }
        Ok(crate::bundle::IsoOutcome::Inconclusive { reason }) => {
            report.push("end-maps", format!("isomorphism search was inconclusive: {reason}"));
        }
        Err(e) => report.push("end-maps", e.to_string()),
    }
    report
}

/// Runs the flatten dichotomy over the bundled corpus: models with
/// invertible attaches must produce flat cocycles, the rest must be
/// rejected with the designated hypothesis error.
pub fn corpus_report() -> crate::report::ValidationReport {
    let mut report = crate::report::ValidationReport::new("flatten corpus");
    for case in flatten_corpus() {
        match (case.expect_flat, crate::strata::flatten(&case.bundle)) {
            (true, Ok(_)) => {}
            (false, Err(crate::error::Error::BundleTheorem(_))) => {}
            (true, Err(e)) => {
                report.push(case.name, format!("expected a flat cocycle, got: {e}"));
            }
            (false, Ok(_)) => report.push(
                case.name,
                "expected the hypothesis rejection, got a flat cocycle".to_string(),
            ),
            (false, Err(e)) => {
                report.push(case.name, format!("rejected with the wrong error: {e}"));
            }
        }
    }
    report
}

/// Seeded basis, radius, and map satisfying the norm-bound hypotheses: the
/// basis is invertible and every basis image lies within the radius. The
/// dimension cycles through 1..=4 with the seed.
pub fn norm_bound_instance(seed: u64) -> (QMat, crate::matrix::Q, Mor) {
    use num_traits::Zero;
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let d = (seed as usize % 4) + 1;
    let beta = loop {
        let mut m = QMat::zero(d, d);
        for r in 0..d {
            for c in 0..d {
                m.set(r, c, crate::matrix::qi(rng.gen_range(-3..=3)));
            }
        }
        if m.inverse().is_some() {
            break m;
        }
    };
    let mut f = QMat::zero(d, d);
    for r in 0..d {
        for c in 0..d {
            f.set(r, c, crate::matrix::q(rng.gen_range(-5..=5), rng.gen_range(1..=3)));
        }
    }
    // Smallest integer radius with r^2 at or above every basis image norm.
    let mut max_sq = crate::matrix::Q::zero();
    for j in 0..d {
        let img = f.mul(&QMat::col_vec(&beta.col(j))).expect("dimensions agree");
        let n = img.col_sq_norm();
        if n > max_sq {
            max_sq = n;
        }
    }
    let bound = max_sq.ceil().to_integer();
    let mut root = bound.sqrt();
    if &root * &root < bound {
        root += 1;
    }
    (beta, crate::matrix::Q::from_integer(root), Mor::new(f))
}

/// Seeded integer matrix with dimensions up to `max_dim`; every third seed
/// scales rows to force nontrivial divisibility chains.
pub fn integer_matrix_instance(seed: u64, max_dim: usize, max_entry: i64) -> crate::snf::ZMat {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let rows = rng.gen_range(0..=max_dim);
    let cols = rng.gen_range(0..=max_dim);
    let mut m = crate::snf::ZMat::zero(rows, cols);
    for r in 0..rows {
        let scale: i64 = if seed % 3 == 0 { (r as i64 % 3) + 1 } else { 1 };
        for c in 0..cols {
            let entry = rng.gen_range(-max_entry..=max_entry) * scale;
            m.set(r, c, num_bigint::BigInt::from(entry));
        }
    }
    m
}

/// A cellular homotopy fixture: a homotopy on the prism over the source
/// total, with a stratified bundle over the destination to pull back along
/// both end maps.
pub struct HomotopyCase {
    pub name: &'static str,
    pub src_space: StratifiedSpace,
    pub dst_space: StratifiedSpace,
    pub homotopy: CellularMap,
    pub x_prime: crate::strata::StratifiedBundle,
}

/// Homotopy on the prism over the circle: both ends wrap the loop
/// `winding` times, the vertex track slides around it `slide` times.
fn circle_loop_homotopy(winding: usize, slide: usize) -> CellularMap {
    let src_total = crate::complex::assemble(&StratifiedSpace::base_only(circle()))
        .expect("circle assembles")
        .total;
    let (prism_complex, _, _) = crate::complex::prism(&src_total).expect("circle prism builds");
    let carrier = |n: usize| if n == 0 { "v" } else { "e" };
    CellularMap {
        src: prism_complex,
        dst: src_total,
        cell_images: BTreeMap::from([
            ("v.0".to_string(), "v".to_string()),
            ("v.1".to_string(), "v".to_string()),
            ("v.01".to_string(), carrier(slide).to_string()),
            ("e.0".to_string(), carrier(winding).to_string()),
            ("e.1".to_string(), carrier(winding).to_string()),
            ("e.01".to_string(), "v".to_string()),
        ]),
        edge_paths: BTreeMap::from([
            ("e.0".to_string(), vec![Step::fwd("e"); winding]),
            ("e.1".to_string(), vec![Step::fwd("e"); winding]),
            ("v.01".to_string(), vec![Step::fwd("e"); slide]),
        ]),
    }
}

/// Homotopy on the prism over the circle whose bottom end lands the loop
/// on `a . b` in the subdivided circle and whose top end lands it on
/// `b . a`, sliding the vertex along `a`.
fn rotate_homotopy() -> CellularMap {
    let src_total = crate::complex::assemble(&StratifiedSpace::base_only(circle()))
        .expect("circle assembles")
        .total;
    let (prism_complex, _, _) = crate::complex::prism(&src_total).expect("circle prism builds");
    let dst_total = crate::complex::assemble(&StratifiedSpace::base_only(subdivided_circle()))
        .expect("subdivided circle assembles")
        .total;
    CellularMap {
        src: prism_complex,
        dst: dst_total,
        cell_images: BTreeMap::from([
            ("v.0".to_string(), "u".to_string()),
            ("v.1".to_string(), "w".to_string()),
            ("v.01".to_string(), "a".to_string()),
            ("e.0".to_string(), "a".to_string()),
            ("e.1".to_string(), "b".to_string()),
            ("e.01".to_string(), "u".to_string()),
        ]),
        edge_paths: BTreeMap::from([
            ("e.0".to_string(), vec![Step::fwd("a"), Step::fwd("b")]),
            ("e.1".to_string(), vec![Step::fwd("b"), Step::fwd("a")]),
            ("v.01".to_string(), vec![Step::fwd("a")]),
        ]),
    }
}

/// Bundle on the subdivided circle with the two given edge labels.
fn two_edge_bundle(category: Arc<StructureCategory>, la: Mor, lb: Mor) -> VBundle {
    let dim = la.src().dim;
    VBundle {
        base: subdivided_circle(),
        category,
        fiber: BTreeMap::from([(String::from("u"), Obj::new(dim))]),
        labels: BTreeMap::from([(String::from("a"), la), (String::from("b"), lb)]),
    }
}

/// Ten prism homotopies paired with bundles to pull back: constant and
/// sliding self-homotopies of the circle, and rotations into the
/// subdivided circle whose two ends traverse the edges in opposite orders.
pub fn prism_homotopy_cases() -> Vec<HomotopyCase> {
    let sp1 = Arc::new(StructureCategory::signed_perm(1));
    let sp2 = Arc::new(StructureCategory::signed_perm(2));
    let sign = |s: i64| Mor::new(QMat::from_i64(&[&[s]]));
    let mor2 = |rows: &[&[i64]]| Mor::new(QMat::from_i64(rows));
    let circle_case = |name, winding, slide, label: i64| HomotopyCase {
        name,
        src_space: StratifiedSpace::base_only(circle()),
        dst_space: StratifiedSpace::base_only(circle()),
        homotopy: circle_loop_homotopy(winding, slide),
        x_prime: crate::strata::StratifiedBundle::one_stratum(circle_bundle(
            sp1.clone(),
            sign(label),
        )),
    };
    let rotate_case = |name, category: &Arc<StructureCategory>, la: Mor, lb: Mor| HomotopyCase {
        name,
        src_space: StratifiedSpace::base_only(circle()),
        dst_space: StratifiedSpace::base_only(subdivided_circle()),
        homotopy: rotate_homotopy(),
        x_prime: crate::strata::StratifiedBundle::one_stratum(two_edge_bundle(
            category.clone(),
            la,
            lb,
        )),
    };
    vec![
        circle_case("constant-trivial", 1, 0, 1),
        circle_case("constant-mobius", 1, 0, -1),
        circle_case("loop-slide-mobius", 1, 1, -1),
        circle_case("degree-two-slide-mobius", 2, 1, -1),
        rotate_case("rotate-trivial", &sp1, sign(1), sign(1)),
        rotate_case("rotate-split-sign", &sp1, sign(-1), sign(1)),
        rotate_case("rotate-late-sign", &sp1, sign(1), sign(-1)),
        rotate_case("rotate-both-signs", &sp1, sign(-1), sign(-1)),
        rotate_case(
            "rotate-swap-diag",
            &sp2,
            mor2(&[&[0, 1], &[1, 0]]),
            mor2(&[&[1, 0], &[0, -1]]),
        ),
        rotate_case(
            "rotate-quarter-diag",
            &sp2,
            mor2(&[&[0, -1], &[1, 0]]),
            mor2(&[&[-1, 0], &[0, 1]]),
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn flatten_corpus_matches_its_dichotomy_column() {
        for case in flatten_corpus() {
            match (case.expect_flat, crate::strata::flatten(&case.bundle)) {
                (true, Ok(_)) => {}
                (false, Err(Error::BundleTheorem(_))) => {}
                (expect, got) => panic!(
                    "case {} expected flat={expect}, got {:?}",
                    case.name,
                    got.map(|b| b.base.cells.len())
                ),
            }
        }
    }

    #[test]
    fn tower_assembles_into_one_vertex_one_loop_one_face() {
        let asm = crate::complex::assemble(&tower_space()).expect("tower assembles");
        assert_eq!(asm.total.dim_counts(), vec![1, 1, 1]);
        assert_eq!(asm.total.euler_characteristic(), 1);
    }

    #[test]
    fn law_instances_are_reproducible_and_well_formed() {
        let a = law_instance(7);
        let b = law_instance(7);
        assert_eq!(a.f, b.f);
        assert_eq!(a.g, b.g);
        assert_eq!(a.y1.labels, b.y1.labels);
        for seed in 0..10 {
            let inst = law_instance(seed);
            assert!(crate::lincat::compose(&inst.f, &inst.g).is_ok());
            for y in [&inst.y1, &inst.y2, &inst.y3] {
                assert!(crate::bundle::validate_bundle(y).is_valid(), "seed {seed}");
            }
            assert!(
                crate::complex::validate_cellular(&inst.base_map).is_valid(),
                "seed {seed}"
            );
            let rank_sum: usize = [&inst.y1, &inst.y2, &inst.y3]
                .iter()
                .map(|y| y.fiber.values().next().expect("one component").dim)
                .sum();
            assert!(rank_sum <= 4, "seed {seed}");
        }
    }

    #[test]
    fn homotopy_cases_are_cellular_and_stratum_preserving() {
        let cases = prism_homotopy_cases();
        assert_eq!(cases.len(), 10);
        for case in &cases {
            assert!(
                crate::complex::validate_cellular(&case.homotopy).is_valid(),
                "case {}",
                case.name
            );
            assert!(
                crate::complex::check_stratum_preserving(&case.homotopy)
                    .expect("both sides tagged")
                    .is_valid(),
                "case {}",
                case.name
            );
        }
    }

    #[test]
    fn shared_reports_pass_on_the_bundled_suites() {
        assert!(corpus_report().is_valid());
        for seed in 0..5 {
            let report = law_report(&law_instance(seed));
            assert!(report.is_valid(), "seed {seed}: {:?}", report.violations);
        }
        for case in prism_homotopy_cases() {
            let report = homotopy_report(&case);
            assert!(report.is_valid(), "case {}: {:?}", case.name, report.violations);
        }
        for seed in 0..8 {
            let (beta, r, f) = norm_bound_instance(seed);
            let outcome = crate::lincat::norm_bound_check(&beta, &r, &f, 5, seed)
                .expect("instance satisfies the hypotheses");
            assert!(outcome.holds, "seed {seed}");
        }
        for seed in 0..8 {
            let m = integer_matrix_instance(seed, 6, 9);
            let s = crate::snf::smith_normal_form(&m);
            let left = s.u.mul(&m).expect("row counts agree");
            assert_eq!(left.mul(&s.v).expect("column counts agree"), s.d, "seed {seed}");
        }
    }

    #[test]
    fn rotated_ends_pull_back_to_distinct_but_isomorphic_cocycles() {
        let cases = prism_homotopy_cases();
        let case = cases
            .iter()
            .find(|c| c.name == "rotate-swap-diag")
            .expect("case list holds the swap-diag rotation");
        let src_total = crate::complex::assemble(&case.src_space)
            .expect("source assembles")
            .total;
        let (f0, f1) = crate::strata::homotopy_end_maps(&case.homotopy, &src_total)
            .expect("end maps compose");
        let x0 = crate::strata::pullback_stratified(&case.src_space, &f0, &case.x_prime)
            .expect("bottom pullback");
        let x1 = crate::strata::pullback_stratified(&case.src_space, &f1, &case.x_prime)
            .expect("top pullback");
        assert_ne!(x0.layer0.labels["e"], x1.layer0.labels["e"]);
        assert!(crate::strata::is_isomorphic_stratified(&x0, &x1)
            .expect("finite search concludes")
            .is_witness());
    }
}
