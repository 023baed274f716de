//! Structure categories of rational matrices and functors between them.
//!
//! A structure category is a subcategory of finite-dimensional rational
//! vector spaces: objects are the spaces `R^n` (recorded by dimension) and
//! morphisms are explicit matrices. Finite categories enumerate their
//! morphisms and admit exhaustive checks; open categories are given by a
//! membership predicate and support composition and application but refuse
//! exhaustive classification.

use crate::error::{Error, Result};
use crate::matrix::{format_q, QMat, Q};
use crate::report::ValidationReport;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

/// An object `R^dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Obj {
    pub dim: usize,
}

impl Obj {
    pub fn new(dim: usize) -> Self {
        Obj { dim }
    }
}

/// A morphism, i.e. a rational matrix. Source and target dimensions are the
/// column and row counts of the matrix.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mor {
    pub matrix: QMat,
}

impl Mor {
    pub fn new(matrix: QMat) -> Self {
        Mor { matrix }
    }

    pub fn identity(dim: usize) -> Self {
        Mor { matrix: QMat::identity(dim) }
    }

    pub fn src(&self) -> Obj {
        Obj::new(self.matrix.cols())
    }

    pub fn dst(&self) -> Obj {
        Obj::new(self.matrix.rows())
    }

    pub fn is_identity(&self) -> bool {
        self.matrix.is_identity()
    }

    pub fn is_endo(&self) -> bool {
        self.matrix.is_square()
    }

    /// Two-sided inverse, when the matrix has one.
    pub fn inverse(&self) -> Option<Mor> {
        self.matrix.inverse().map(Mor::new)
    }

    pub fn is_invertible(&self) -> bool {
        self.matrix.is_square() && self.matrix.rank() == self.matrix.rows()
    }

    pub fn block_diag(&self, other: &Mor) -> Mor {
        Mor::new(self.matrix.block_diag(&other.matrix))
    }

    pub fn kron(&self, other: &Mor) -> Mor {
        Mor::new(self.matrix.kron(&other.matrix))
    }
}

/// Composes `f` after `g` as the matrix product `f * g`, i.e. `g` acts first.
pub fn compose(f: &Mor, g: &Mor) -> Result<Mor> {
    if g.dst() != f.src() {
        return Err(Error::NotComposable(format!(
            "target R^{} of the first factor's right operand does not match source R^{}",
            g.dst().dim,
            f.src().dim
        )));
    }
    Ok(Mor::new(f.matrix.mul(&g.matrix)?))
}

/// Closure flags a category declares about itself. `validate_category`
/// checks the declared flags against the listed morphisms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CatFlags {
    /// Every morphism has a two-sided inverse in the category.
    pub is_groupoid: bool,
    /// Block-diagonal sums of morphisms stay in the category whenever the
    /// summed dimensions are again objects.
    pub has_sum: bool,
    /// Kronecker products of morphisms stay in the category whenever the
    /// multiplied dimensions are again objects.
    pub has_tensor: bool,
}

/// Membership rule of an open category.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OpenRule {
    /// All invertible square matrices of dimension at most `max_dim`.
    GeneralLinear { max_dim: usize },
    /// All rational matrices between dimensions at most `max_dim`.
    AllMatrices { max_dim: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CatKind {
    /// Explicitly enumerated objects and morphisms.
    Finite { objects: BTreeSet<usize>, morphisms: Vec<Mor> },
    /// Membership predicate, no enumeration.
    Open(OpenRule),
}

/// A structure category.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructureCategory {
    pub name: String,
    pub flags: CatFlags,
    pub kind: CatKind,
}

impl StructureCategory {
    /// Finite category from explicit data. Morphisms are sorted and
    /// deduplicated; validity is checked separately by `validate_category`.
    pub fn finite(
        name: impl Into<String>,
        objects: BTreeSet<usize>,
        mut morphisms: Vec<Mor>,
        flags: CatFlags,
    ) -> Self {
        morphisms.sort();
        morphisms.dedup();
        StructureCategory { name: name.into(), flags, kind: CatKind::Finite { objects, morphisms } }
    }

    /// The category with the single object `R^0` and its identity.
    pub fn trivial() -> Self {
        StructureCategory::finite(
            "trivial",
            BTreeSet::from([0]),
            vec![Mor::identity(0)],
            CatFlags { is_groupoid: true, has_sum: true, has_tensor: true },
        )
    }

    /// Signed permutation matrices on objects `R^0 .. R^max_dim`.
    pub fn signed_perm(max_dim: usize) -> Self {
        let mut morphisms = Vec::new();
        for d in 0..=max_dim {
            morphisms.extend(signed_perm_matrices(d).into_iter().map(Mor::new));
        }
        StructureCategory::finite(
            format!("signed_perm({max_dim})"),
            (0..=max_dim).collect(),
            morphisms,
            CatFlags { is_groupoid: true, has_sum: true, has_tensor: true },
        )
    }

    /// Open category of all invertible matrices of dimension at most `max_dim`.
    pub fn gl_open(max_dim: usize) -> Self {
        StructureCategory {
            name: format!("gl_open({max_dim})"),
            flags: CatFlags { is_groupoid: true, has_sum: true, has_tensor: true },
            kind: CatKind::Open(OpenRule::GeneralLinear { max_dim }),
        }
    }

    /// Open category of all rational matrices between dimensions at most
    /// `max_dim`. Not a groupoid; this is where rank-dropping attach maps
    /// live.
    pub fn vect_open(max_dim: usize) -> Self {
        StructureCategory {
            name: format!("vect_open({max_dim})"),
            flags: CatFlags { is_groupoid: false, has_sum: true, has_tensor: true },
            kind: CatKind::Open(OpenRule::AllMatrices { max_dim }),
        }
    }

    /// Resolves a builtin category name such as `"signed_perm(2)"`,
    /// `"trivial"`, `"gl_open(3)"` or `"vect_open(4)"`.
    pub fn builtin(name: &str) -> Result<Self> {
        let name = name.trim();
        if name == "trivial" {
            return Ok(StructureCategory::trivial());
        }
        for (prefix, ctor) in [
            ("signed_perm", StructureCategory::signed_perm as fn(usize) -> Self),
            ("gl_open", StructureCategory::gl_open as fn(usize) -> Self),
            ("vect_open", StructureCategory::vect_open as fn(usize) -> Self),
        ] {
            if let Some(rest) = name.strip_prefix(prefix) {
                let inner = rest
                    .strip_prefix('(')
                    .and_then(|s| s.strip_suffix(')'))
                    .ok_or_else(|| Error::Schema(format!("malformed category name {name:?}")))?;
                let n: usize = inner
                    .parse()
                    .map_err(|_| Error::Schema(format!("bad dimension in {name:?}")))?;
                if prefix == "signed_perm" && n > 6 {
                    return Err(Error::Schema(format!(
                        "signed_perm({n}) is too large to enumerate"
                    )));
                }
                return Ok(ctor(n));
            }
        }
        Err(Error::Schema(format!("unknown builtin category {name:?}")))
    }

    pub fn is_finite(&self) -> bool {
        matches!(self.kind, CatKind::Finite { .. })
    }

    pub fn contains_object(&self, dim: usize) -> bool {
        match &self.kind {
            CatKind::Finite { objects, .. } => objects.contains(&dim),
            CatKind::Open(OpenRule::GeneralLinear { max_dim })
            | CatKind::Open(OpenRule::AllMatrices { max_dim }) => dim <= *max_dim,
        }
    }

    pub fn objects(&self) -> Result<Vec<usize>> {
        match &self.kind {
            CatKind::Finite { objects, .. } => Ok(objects.iter().copied().collect()),
            CatKind::Open(_) => Err(Error::UnsupportedCategory(format!(
                "cannot enumerate objects of {}",
                self.name
            ))),
        }
    }

    pub fn contains_morphism(&self, f: &Mor) -> bool {
        match &self.kind {
            CatKind::Finite { morphisms, .. } => morphisms.binary_search(f).is_ok(),
            CatKind::Open(OpenRule::GeneralLinear { max_dim }) => {
                f.src().dim <= *max_dim && f.is_invertible()
            }
            CatKind::Open(OpenRule::AllMatrices { max_dim }) => {
                f.src().dim <= *max_dim && f.dst().dim <= *max_dim
            }
        }
    }

    /// All listed morphisms `R^src -> R^dst`. Refused for open categories.
    pub fn hom(&self, src: usize, dst: usize) -> Result<Vec<Mor>> {
        match &self.kind {
            CatKind::Finite { morphisms, .. } => Ok(morphisms
                .iter()
                .filter(|m| m.src().dim == src && m.dst().dim == dst)
                .cloned()
                .collect()),
            CatKind::Open(_) => Err(Error::UnsupportedCategory(format!(
                "cannot enumerate hom sets of {}",
                self.name
            ))),
        }
    }

    /// All listed automorphisms of `R^dim`. Refused for open categories.
    pub fn automorphisms(&self, dim: usize) -> Result<Vec<Mor>> {
        Ok(self.hom(dim, dim)?.into_iter().filter(Mor::is_invertible).collect())
    }

    pub fn morphism_count(&self) -> Option<usize> {
        match &self.kind {
            CatKind::Finite { morphisms, .. } => Some(morphisms.len()),
            CatKind::Open(_) => None,
        }
    }

    /// Membership errors phrased for the operation that hit them.
    pub fn require_morphism(&self, f: &Mor, context: &str) -> Result<()> {
        if self.contains_morphism(f) {
            Ok(())
        } else {
            Err(Error::NotInCategory(format!(
                "{context}: {:?} is not a morphism of {}",
                f.matrix, self.name
            )))
        }
    }
}

/// All signed permutation matrices of size `d`, in sorted order.
fn signed_perm_matrices(d: usize) -> Vec<QMat> {
    let mut out = Vec::new();
    let mut perm: Vec<usize> = (0..d).collect();
    permute(&mut perm, 0, &mut |p| {
        for signs in 0..(1usize << d) {
            let mut m = QMat::zero(d, d);
            for (j, &i) in p.iter().enumerate() {
                let v = if signs >> j & 1 == 1 { -Q::one() } else { Q::one() };
                m.set(i, j, v);
            }
            out.push(m);
        }
    });
    out.sort();
    out
}

fn permute(p: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == p.len() {
        f(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, f);
        p.swap(k, i);
    }
}

/// Checks the declared closure flags of a category against its morphism list.
///
/// For finite categories every check is exhaustive: identities, composition
/// closure, inverses when `is_groupoid`, block-diagonal closure when
/// `has_sum`, Kronecker closure when `has_tensor`. Sum and tensor closure
/// are only required where the combined dimensions are again objects;
/// combinations leaving the object window are not violations.
pub fn validate_category(cat: &StructureCategory) -> ValidationReport {
    let mut report = ValidationReport::new(format!("category {}", cat.name));
    let CatKind::Finite { objects, morphisms } = &cat.kind else {
        // Open categories hold their closure properties by construction of
        // the membership rule; there is nothing to enumerate.
        return report;
    };
    for &d in objects {
        if !cat.contains_morphism(&Mor::identity(d)) {
            report.push("identity", format!("missing identity on R^{d}"));
        }
    }
    for f in morphisms {
        if !objects.contains(&f.src().dim) || !objects.contains(&f.dst().dim) {
            report.push(
                "object",
                format!("morphism {:?} touches a dimension that is not an object", f.matrix),
            );
        }
    }
    for f in morphisms {
        for g in morphisms {
            if g.dst() == f.src() {
                let fg = compose(f, g).expect("dimensions checked");
                if !cat.contains_morphism(&fg) {
                    report.push(
                        "composition-closure",
                        format!("{:?} * {:?} = {:?} is not listed", f.matrix, g.matrix, fg.matrix),
                    );
                }
            }
        }
    }
    if cat.flags.is_groupoid {
        for f in morphisms {
            let ok = f
                .inverse()
                .map(|inv| cat.contains_morphism(&inv))
                .unwrap_or(false);
            if !ok {
                report.push("groupoid", format!("{:?} has no listed two-sided inverse", f.matrix));
            }
        }
    }
    if cat.flags.has_sum {
        for f in morphisms {
            for g in morphisms {
                let src = f.src().dim + g.src().dim;
                let dst = f.dst().dim + g.dst().dim;
                if objects.contains(&src) && objects.contains(&dst) {
                    let s = f.block_diag(g);
                    if !cat.contains_morphism(&s) {
                        report.push(
                            "sum-closure",
                            format!("diag({:?}, {:?}) is not listed", f.matrix, g.matrix),
                        );
                    }
                }
            }
        }
    }
    if cat.flags.has_tensor {
        for f in morphisms {
            for g in morphisms {
                let src = f.src().dim * g.src().dim;
                let dst = f.dst().dim * g.dst().dim;
                if objects.contains(&src) && objects.contains(&dst) {
                    let t = f.kron(g);
                    if !cat.contains_morphism(&t) {
                        report.push(
                            "tensor-closure",
                            format!("{:?} (x) {:?} is not listed", f.matrix, g.matrix),
                        );
                    }
                }
            }
        }
    }
    report
}

/// The permutative closure of a finite groupoid within a dimension window:
/// objects are `0` and every window-bounded sum of positive objects of
/// `cat`; morphisms of dimension `d` form the group generated by
/// block-diagonal sums of `cat`-automorphisms and block permutations, over
/// all decompositions of `d` into positive objects of `cat`.
///
/// Direct sums of `cat`-labeled bundles live here, as do the gauges that
/// witness reorderings of summands.
pub fn permutative_closure(cat: &StructureCategory, max_dim: usize) -> Result<StructureCategory> {
    if !cat.flags.is_groupoid {
        return Err(Error::UnsupportedCategory(format!(
            "permutative closure needs a groupoid, {} is not one",
            cat.name
        )));
    }
    let parts: Vec<usize> = cat
        .objects()?
        .into_iter()
        .filter(|&d| d > 0 && d <= max_dim)
        .collect();
    let mut objects = BTreeSet::from([0usize]);
    let mut reachable = vec![false; max_dim + 1];
    reachable[0] = true;
    for d in 1..=max_dim {
        reachable[d] = parts.iter().any(|&p| p <= d && reachable[d - p]);
        if reachable[d] {
            objects.insert(d);
        }
    }
    let mut morphisms = vec![Mor::identity(0)];
    for &d in objects.iter().filter(|&&d| d > 0) {
        let mut generators: BTreeSet<QMat> = BTreeSet::new();
        for comp in compositions(d, &parts) {
            // Single-slot automorphism insertions generate all block tuples.
            for (slot, &p) in comp.iter().enumerate() {
                let before: usize = comp[..slot].iter().sum();
                let after: usize = comp[slot + 1..].iter().sum();
                for g in cat.automorphisms(p)? {
                    let m = QMat::identity(before)
                        .block_diag(&g.matrix)
                        .block_diag(&QMat::identity(after));
                    generators.insert(m);
                }
            }
            for slot in 0..comp.len().saturating_sub(1) {
                let before: usize = comp[..slot].iter().sum();
                let (a, b) = (comp[slot], comp[slot + 1]);
                let after: usize = comp[slot + 2..].iter().sum();
                let mut swap = QMat::zero(a + b, a + b);
                for i in 0..b {
                    swap.set(i, a + i, Q::one());
                }
                for i in 0..a {
                    swap.set(b + i, i, Q::one());
                }
                let m = QMat::identity(before)
                    .block_diag(&swap)
                    .block_diag(&QMat::identity(after));
                generators.insert(m);
            }
        }
        let group = group_closure(generators, 200_000).ok_or_else(|| {
            Error::UnsupportedCategory(format!(
                "permutative closure of {} at dimension {d} exceeds the closure budget",
                cat.name
            ))
        })?;
        morphisms.extend(group.into_iter().map(Mor::new));
    }
    let sum_cat = StructureCategory::finite(
        format!("sum_closure({}, {max_dim})", cat.name),
        objects,
        morphisms,
        CatFlags { is_groupoid: true, has_sum: true, has_tensor: false },
    );
    // Tensor closure is not automatic for a sum closure; record it honestly.
    let mut with_tensor = sum_cat.clone();
    with_tensor.flags.has_tensor = true;
    let tensor_ok = validate_category(&with_tensor).is_valid();
    Ok(if tensor_ok { with_tensor } else { sum_cat })
}

/// Multiplicative closure of a set of invertible matrices of one size.
/// Returns `None` when the closure exceeds `budget` elements.
fn group_closure(generators: BTreeSet<QMat>, budget: usize) -> Option<BTreeSet<QMat>> {
    let mut set = generators.clone();
    if let Some(first) = set.iter().next() {
        set.insert(QMat::identity(first.rows()));
    }
    let mut frontier: Vec<QMat> = set.iter().cloned().collect();
    while let Some(m) = frontier.pop() {
        for g in generators.iter() {
            let p = m.mul(g).expect("square same-size");
            if set.insert(p.clone()) {
                if set.len() > budget {
                    return None;
                }
                frontier.push(p);
            }
        }
    }
    Some(set)
}

/// Ordered decompositions of `total` into parts drawn from `parts`.
fn compositions(total: usize, parts: &[usize]) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(rem: usize, parts: &[usize], cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rem == 0 {
            if !cur.is_empty() {
                out.push(cur.clone());
            }
            return;
        }
        for &p in parts {
            if p <= rem {
                cur.push(p);
                rec(rem - p, parts, cur, out);
                cur.pop();
            }
        }
    }
    rec(total, parts, &mut cur, &mut out);
    out
}

/// Rule of a functor between structure categories.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FunctorRule {
    Identity,
    /// `f` maps to the inverse transpose of `f`. Defined on invertible
    /// morphisms only.
    DualInverseTranspose,
    /// Every object maps to `R^1`, every square morphism to its determinant.
    Determinant,
    /// `V` maps to `V (x) R^k`, `f` to `f (x) id_k`.
    TensorByObject(usize),
    /// Everything maps to `R^0`.
    ZeroObject,
    /// Explicit lookup tables over a finite source category.
    Table { obj_map: BTreeMap<usize, usize>, mor_map: BTreeMap<Mor, Mor> },
}

/// A functor between structure categories, with declared source and target.
#[derive(Debug, Clone)]
pub struct MatrixFunctor {
    pub name: String,
    pub source: Arc<StructureCategory>,
    pub target: Arc<StructureCategory>,
    pub rule: FunctorRule,
}

impl MatrixFunctor {
    pub fn new(
        name: impl Into<String>,
        source: Arc<StructureCategory>,
        target: Arc<StructureCategory>,
        rule: FunctorRule,
    ) -> Self {
        MatrixFunctor { name: name.into(), source, target, rule }
    }

    /// Image dimension of an object.
    pub fn obj_image(&self, dim: usize) -> Result<usize> {
        if !self.source.contains_object(dim) {
            return Err(Error::FunctorDomain(format!(
                "R^{dim} is not an object of {}",
                self.source.name
            )));
        }
        match &self.rule {
            FunctorRule::Identity | FunctorRule::DualInverseTranspose => Ok(dim),
            FunctorRule::Determinant => Ok(1),
            FunctorRule::TensorByObject(k) => Ok(dim * k),
            FunctorRule::ZeroObject => Ok(0),
            FunctorRule::Table { obj_map, .. } => obj_map.get(&dim).copied().ok_or_else(|| {
                Error::FunctorDomain(format!("table functor {} lacks R^{dim}", self.name))
            }),
        }
    }

    /// Raw morphism rule, before the target membership check.
    fn mor_image(&self, f: &Mor) -> Result<Mor> {
        match &self.rule {
            FunctorRule::Identity => Ok(f.clone()),
            FunctorRule::DualInverseTranspose => f
                .inverse()
                .map(|inv| Mor::new(inv.matrix.transpose()))
                .ok_or_else(|| {
                    Error::FunctorDomain(format!(
                        "dual functor needs an invertible morphism, got {:?}",
                        f.matrix
                    ))
                }),
            FunctorRule::Determinant => {
                let d = f.matrix.det().map_err(|_| {
                    Error::FunctorDomain(format!(
                        "determinant functor needs a square morphism, got {:?}",
                        f.matrix
                    ))
                })?;
                Ok(Mor::new(QMat::new(1, 1, vec![d])))
            }
            FunctorRule::TensorByObject(k) => Ok(Mor::new(f.matrix.kron(&QMat::identity(*k)))),
            FunctorRule::ZeroObject => Ok(Mor::identity(0)),
            FunctorRule::Table { mor_map, .. } => mor_map.get(f).cloned().ok_or_else(|| {
                Error::FunctorDomain(format!("table functor {} lacks {:?}", self.name, f.matrix))
            }),
        }
    }
}

/// Applies a functor to one morphism: membership in the declared source,
/// the rule, then membership of the image in the declared target.
pub fn apply_functor(functor: &MatrixFunctor, f: &Mor) -> Result<Mor> {
    functor
        .source
        .require_morphism(f, &format!("applying functor {}", functor.name))
        .map_err(|e| Error::FunctorDomain(e.to_string()))?;
    let image = functor.mor_image(f)?;
    let expect_src = functor.obj_image(f.src().dim)?;
    let expect_dst = functor.obj_image(f.dst().dim)?;
    if image.src().dim != expect_src || image.dst().dim != expect_dst {
        return Err(Error::FunctorDomain(format!(
            "functor {} produced a {}x{} matrix where {}x{} was required",
            functor.name,
            image.dst().dim,
            image.src().dim,
            expect_dst,
            expect_src
        )));
    }
    functor.target.require_morphism(&image, &format!("image under functor {}", functor.name))?;
    Ok(image)
}

/// Checks functor laws. Exhaustive over finite sources: identities map to
/// identities, composition is preserved on every composable pair, and every
/// image lies in the declared target.
pub fn validate_functor(functor: &MatrixFunctor) -> ValidationReport {
    let mut report = ValidationReport::new(format!("functor {}", functor.name));
    let CatKind::Finite { objects, morphisms } = &functor.source.kind else {
        // Open sources cannot be enumerated; check identity preservation on
        // each dimension the rule will accept.
        if let CatKind::Open(
            OpenRule::GeneralLinear { max_dim } | OpenRule::AllMatrices { max_dim },
        ) = &functor.source.kind
        {
            for d in 0..=*max_dim {
                match apply_functor(functor, &Mor::identity(d)) {
                    Ok(img) if img.is_identity() => {}
                    Ok(img) => report.push(
                        "identity",
                        format!("identity on R^{d} maps to non-identity {:?}", img.matrix),
                    ),
                    Err(e) => report.push("identity", format!("identity on R^{d}: {e}")),
                }
            }
        }
        return report;
    };
    for &d in objects {
        match apply_functor(functor, &Mor::identity(d)) {
            Ok(img) if img.is_identity() => {}
            Ok(img) => report.push(
                "identity",
                format!("identity on R^{d} maps to non-identity {:?}", img.matrix),
            ),
            Err(e) => report.push("identity", format!("identity on R^{d}: {e}")),
        }
    }
    let images: BTreeMap<&Mor, Result<Mor>> =
        morphisms.iter().map(|f| (f, apply_functor(functor, f))).collect();
    for (f, img) in &images {
        if let Err(e) = img {
            report.push("domain", format!("{:?}: {e}", f.matrix));
        }
    }
    for f in morphisms {
        for g in morphisms {
            if g.dst() != f.src() {
                continue;
            }
            let (Ok(ff), Ok(gg)) = (&images[f], &images[g]) else {
                continue;
            };
            let fg = compose(f, g).expect("dimensions checked");
            let Ok(fg_img) = apply_functor(functor, &fg) else {
                report.push(
                    "composition",
                    format!("image of {:?} * {:?} is undefined", f.matrix, g.matrix),
                );
                continue;
            };
            match compose(ff, gg) {
                Ok(composed) if composed == fg_img => {}
                _ => report.push(
                    "composition",
                    format!(
                        "F({:?} * {:?}) differs from F({:?}) * F({:?})",
                        f.matrix, g.matrix, f.matrix, g.matrix
                    ),
                ),
            }
        }
    }
    report
}

/// Rule of a bifunctor on pairs of structure categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BifunctorRule {
    /// `(V, W)` maps to `V (+) W`, morphisms to block diagonals.
    DirectSum,
    /// `(V, W)` maps to `V (x) W`, morphisms to Kronecker products.
    Tensor,
    /// `(V, W)` maps to `hom(V, W)`; `(f, g)` maps `phi` to `g phi f^{-1}`.
    /// Defined when `f` is invertible.
    Hom,
}

/// A bifunctor with declared sources and target.
#[derive(Debug, Clone)]
pub struct MatrixBifunctor {
    pub name: String,
    pub left: Arc<StructureCategory>,
    pub right: Arc<StructureCategory>,
    pub target: Arc<StructureCategory>,
    pub rule: BifunctorRule,
}

impl MatrixBifunctor {
    pub fn new(
        name: impl Into<String>,
        left: Arc<StructureCategory>,
        right: Arc<StructureCategory>,
        target: Arc<StructureCategory>,
        rule: BifunctorRule,
    ) -> Self {
        MatrixBifunctor { name: name.into(), left, right, target, rule }
    }

    pub fn obj_image(&self, a: usize, b: usize) -> Result<usize> {
        if !self.left.contains_object(a) || !self.right.contains_object(b) {
            return Err(Error::FunctorDomain(format!(
                "(R^{a}, R^{b}) is outside the sources of bifunctor {}",
                self.name
            )));
        }
        Ok(match self.rule {
            BifunctorRule::DirectSum => a + b,
            BifunctorRule::Tensor | BifunctorRule::Hom => a * b,
        })
    }
}

/// Applies a bifunctor to a pair of morphisms, with membership checks on
/// both sides and on the image.
pub fn apply_bifunctor(bf: &MatrixBifunctor, f: &Mor, g: &Mor) -> Result<Mor> {
    bf.left
        .require_morphism(f, &format!("left argument of {}", bf.name))
        .map_err(|e| Error::FunctorDomain(e.to_string()))?;
    bf.right
        .require_morphism(g, &format!("right argument of {}", bf.name))
        .map_err(|e| Error::FunctorDomain(e.to_string()))?;
    let image = match bf.rule {
        BifunctorRule::DirectSum => f.block_diag(g),
        BifunctorRule::Tensor => f.kron(g),
        BifunctorRule::Hom => {
            // Row-major vectorization of phi |-> g phi f^{-1}.
            let f_inv = f.inverse().ok_or_else(|| {
                Error::FunctorDomain(format!(
                    "hom bifunctor needs an invertible left argument, got {:?}",
                    f.matrix
                ))
            })?;
            Mor::new(g.matrix.kron(&f_inv.matrix.transpose()))
        }
    };
    bf.target.require_morphism(&image, &format!("image under bifunctor {}", bf.name))?;
    Ok(image)
}

/// Checks bifunctor laws exhaustively over finite sources: identities and
/// componentwise composition.
pub fn validate_bifunctor(bf: &MatrixBifunctor) -> ValidationReport {
    let mut report = ValidationReport::new(format!("bifunctor {}", bf.name));
    let (CatKind::Finite { objects: lobj, morphisms: lmor }, CatKind::Finite { objects: robj, morphisms: rmor }) =
        (&bf.left.kind, &bf.right.kind)
    else {
        return report;
    };
    for &a in lobj {
        for &b in robj {
            match apply_bifunctor(bf, &Mor::identity(a), &Mor::identity(b)) {
                Ok(img) if img.is_identity() => {}
                Ok(_) => report.push(
                    "identity",
                    format!("(id R^{a}, id R^{b}) maps to a non-identity"),
                ),
                Err(e) => report.push("identity", format!("(id R^{a}, id R^{b}): {e}")),
            }
        }
    }
    for f1 in lmor {
        for f2 in lmor {
            if f2.dst() != f1.src() {
                continue;
            }
            for g1 in rmor {
                for g2 in rmor {
                    if g2.dst() != g1.src() {
                        continue;
                    }
                    let lhs = compose(&f1.clone(), f2)
                        .and_then(|f| compose(g1, g2).map(|g| (f, g)))
                        .and_then(|(f, g)| apply_bifunctor(bf, &f, &g));
                    let rhs = apply_bifunctor(bf, f1, g1)
                        .and_then(|a| apply_bifunctor(bf, f2, g2).map(|b| (a, b)))
                        .and_then(|(a, b)| compose(&a, &b));
                    match (lhs, rhs) {
                        (Ok(a), Ok(b)) if a == b => {}
                        (Err(_), _) | (_, Err(_)) => {}
                        _ => report.push(
                            "composition",
                            format!(
                                "componentwise composition fails at ({:?}, {:?}) after ({:?}, {:?})",
                                f1.matrix, g1.matrix, f2.matrix, g2.matrix
                            ),
                        ),
                    }
                }
            }
        }
    }
    report
}

/// Outcome of the basis norm bound check.
#[derive(Debug, Clone)]
pub struct NormBoundReport {
    /// Whether every tested vector satisfied the bound.
    pub holds: bool,
    /// Largest observed value of `|f x| / (sqrt(d) R |beta^-1| |x|)`.
    pub max_ratio: f64,
    /// How many vectors were verified by exact rational comparison.
    pub exact_checks: usize,
    /// How many fell back to a float comparison within tolerance.
    pub float_checks: usize,
    /// Vectors tested in total, basis columns included.
    pub tested: usize,
}

/// Float comparison tolerance for the operator-norm fallback.
pub const NORM_BOUND_TOLERANCE: f64 = 1e-9;

/// Verifies the basis norm bound on one linear map.
///
/// `beta` carries the basis `b_i = beta e_i` in its columns. Preconditions:
/// `beta` invertible and `|f b_i| <= r` for every column; violation is an
/// error. The claim checked is `|f x| <= sqrt(d) r |beta^-1| |x|` on the
/// basis columns and on `samples` seeded pseudo-random rational vectors.
///
/// Squared-norm comparisons run in exact rational arithmetic wherever
/// possible: the exact route replaces `|beta^-1|^2` by a rational Rayleigh
/// lower bound, which only strengthens the inequality being verified. When
/// the exact route cannot certify a sample, the comparison falls back to
/// floats with tolerance [`NORM_BOUND_TOLERANCE`].
pub fn norm_bound_check(
    beta: &QMat,
    r: &Q,
    f: &Mor,
    samples: usize,
    seed: u64,
) -> Result<NormBoundReport> {
    if !beta.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "basis matrix must be square, got {}x{}",
            beta.rows(),
            beta.cols()
        )));
    }
    let d = beta.cols();
    if f.src().dim != d {
        return Err(Error::DimensionMismatch(format!(
            "map expects R^{}, basis spans R^{d}",
            f.src().dim
        )));
    }
    if r.is_negative() {
        return Err(Error::Invalid("norm bound radius must be nonnegative".into()));
    }
    let beta_inv = beta
        .inverse()
        .ok_or_else(|| Error::Singular("basis matrix is not invertible".into()))?;
    let r2 = r * r;
    for j in 0..d {
        let bj = QMat::col_vec(&beta.col(j));
        let img = f.matrix.mul(&bj)?;
        if img.col_sq_norm() > r2 {
            return Err(Error::Invalid(format!(
                "precondition violated: |f b_{j}| exceeds the radius {}",
                format_q(r)
            )));
        }
    }
    // Exact lower bound for |beta^-1|^2 via a rationalized power-iteration
    // eigenvector; any rational Rayleigh quotient of (beta^-1)(beta^-1)^T
    // bounds the squared operator norm from below.
    let op_est = beta_inv.op_norm_estimate();
    let witness = power_iteration_vector(&beta_inv);
    let rational_witness: Vec<Q> = witness
        .iter()
        .map(|&x| rationalize(x, 1 << 20))
        .collect();
    let rayleigh = beta_inv.rayleigh_sq_lower_bound(&rational_witness);
    let d_q = Q::from_integer(d.into());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vectors: Vec<Vec<Q>> = (0..d).map(|j| beta.col(j)).collect();
    for _ in 0..samples {
        let v: Vec<Q> = (0..d)
            .map(|_| {
                let num = rng.gen_range(-9i64..=9);
                let den = rng.gen_range(1i64..=9);
                crate::matrix::q(num, den)
            })
            .collect();
        if v.iter().all(Zero::is_zero) {
            continue;
        }
        vectors.push(v);
    }
    let mut report = NormBoundReport {
        holds: true,
        max_ratio: 0.0,
        exact_checks: 0,
        float_checks: 0,
        tested: 0,
    };
    let denom_f = (d as f64).sqrt() * r.to_f64().unwrap_or(0.0) * op_est;
    for v in &vectors {
        if v.iter().all(Zero::is_zero) {
            continue;
        }
        report.tested += 1;
        let x = QMat::col_vec(v);
        let img_sq = f.matrix.mul(&x)?.col_sq_norm();
        let x_sq = x.col_sq_norm();
        let ratio = (img_sq.to_f64().unwrap_or(f64::INFINITY).sqrt())
            / (denom_f * x_sq.to_f64().unwrap_or(1.0).sqrt()).max(f64::MIN_POSITIVE);
        if ratio > report.max_ratio {
            report.max_ratio = ratio;
        }
        let exact_ok = rayleigh
            .as_ref()
            .map(|ray| img_sq <= &d_q * &r2 * ray * &x_sq)
            .unwrap_or(false);
        if exact_ok {
            report.exact_checks += 1;
        } else {
            report.float_checks += 1;
            if ratio > 1.0 + NORM_BOUND_TOLERANCE {
                report.holds = false;
            }
        }
    }
    Ok(report)
}

/// Final direction of the power iteration on `m m^T`, as floats.
fn power_iteration_vector(m: &QMat) -> Vec<f64> {
    let a = m.to_f64();
    let rows = m.rows();
    let cols = m.cols();
    let mut v = vec![1.0; rows];
    for _ in 0..200 {
        let mut atv = vec![0.0; cols];
        for i in 0..rows {
            for j in 0..cols {
                atv[j] += a[i][j] * v[i];
            }
        }
        let mut w = vec![0.0; rows];
        for i in 0..rows {
            for j in 0..cols {
                w[i] += a[i][j] * atv[j];
            }
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return v;
        }
        v = w.iter().map(|x| x / norm).collect();
    }
    v
}

/// Nearest rational with denominator at most `max_den`, by continued
/// fractions on a grid.
fn rationalize(x: f64, max_den: i64) -> Q {
    if !x.is_finite() {
        return Q::zero();
    }
    let scaled = (x * max_den as f64).round() as i64;
    crate::matrix::q(scaled, max_den)
}
