//! Iso-class monoid of stratified bundles over a fixed base and its
//! Grothendieck group.
//!
//! Classes are enumerated exhaustively for finite structure categories:
//! every assignment of fiber dimensions within the rank cap, every choice
//! of edge labels and attach fiber maps in the category, filtered by the
//! stratified validity gates and deduplicated by verified isomorphism.
//! Direct sums are then closed off within the cap; sums leaving the window
//! are recorded as such, never guessed. The group completion presents the
//! free abelian group on nonzero classes modulo one relation per verified
//! table entry and diagonalizes the relation matrix.
//!
//! Sums of bundles for a category without large objects live in its
//! permutative closure, which also supplies the gauges used to compare
//! them; a closure at the rank cap is used as the ambient category
//! whenever the declared category does not already cover the window.

use crate::bundle::{IsoOutcome, VBundle};
use crate::complex::{assemble, CellId, CellularMap, StratifiedSpace};
use crate::error::{Error, Result};
use crate::functorial::map_stratified2;
use crate::lincat::{permutative_closure, BifunctorRule, MatrixBifunctor, Mor, Obj, StructureCategory};
use crate::report::ValidationReport;
use crate::snf::{smith_normal_form, Snf, ZMat};
use crate::strata::{
    build_stratified, is_isomorphic_stratified, pullback_stratified, AttachingVMap,
    StratifiedBundle,
};
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;
use std::sync::Arc;

/// Total number of candidate bundles the enumerator is willing to build.
const ENUMERATION_BUDGET: usize = 200_000;

/// Result of one monoid addition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SumEntry {
    /// The sum is isomorphic to the listed class.
    Class(usize),
    /// The sum leaves the per-stratum rank window; nothing is asserted.
    OutsideWindow,
    /// The isomorphism search was inconclusive; nothing is asserted.
    Unknown,
}

/// The iso-class monoid of stratified bundles over one base, within a
/// per-stratum rank window.
#[derive(Debug, Clone)]
pub struct ClassMonoid {
    pub base: StratifiedSpace,
    /// Structure category the enumerated labels and attaches come from.
    pub category: Arc<StructureCategory>,
    /// Category in which sums and comparison gauges live.
    pub ambient: Arc<StructureCategory>,
    pub rank_cap: usize,
    /// Pairwise non-isomorphic representatives; index 0 is the zero class.
    pub classes: Vec<StratifiedBundle>,
    /// Verified sums, keyed by ordered index pairs (i <= j).
    pub add_table: BTreeMap<(usize, usize), SumEntry>,
    /// Set when a budget or an inconclusive comparison may have hidden
    /// classes or entries.
    pub partial: bool,
}

enum Classified {
    Known(usize),
    New,
    Unsure,
}

/// Per-slot fiber dimensions of a bundle: the base components first, then
/// each layer's components, in sorted key order.
fn slot_dims(b: &StratifiedBundle) -> Vec<usize> {
    let mut dims: Vec<usize> = b.layer0.fiber.values().map(|o| o.dim).collect();
    for (m, _) in &b.layers {
        dims.extend(m.fiber.values().map(|o| o.dim));
    }
    dims
}

fn classify_among(classes: &[StratifiedBundle], b: &StratifiedBundle) -> Result<Classified> {
    let dims = slot_dims(b);
    let mut unsure = false;
    for (idx, c) in classes.iter().enumerate() {
        if slot_dims(c) != dims {
            continue;
        }
        match is_isomorphic_stratified(b, c)? {
            IsoOutcome::Witness(_) => return Ok(Classified::Known(idx)),
            IsoOutcome::NoIso { .. } => {}
            IsoOutcome::Inconclusive { .. } => unsure = true,
        }
    }
    Ok(if unsure { Classified::Unsure } else { Classified::New })
}

impl ClassMonoid {
    pub fn zero_index(&self) -> usize {
        0
    }

    fn classify_full(&self, b: &StratifiedBundle) -> Result<Classified> {
        classify_among(&self.classes, b)
    }

    /// Index of the class a bundle belongs to; `None` when it matches no
    /// representative (out of window, or the search was inconclusive).
    pub fn classify(&self, b: &StratifiedBundle) -> Result<Option<usize>> {
        Ok(match self.classify_full(b)? {
            Classified::Known(idx) => Some(idx),
            _ => None,
        })
    }

    /// The direct-sum bifunctor used to add classes.
    fn sum_bifunctor(&self) -> MatrixBifunctor {
        MatrixBifunctor::new(
            "oplus",
            self.ambient.clone(),
            self.ambient.clone(),
            self.ambient.clone(),
            BifunctorRule::DirectSum,
        )
    }

    /// Constructs the direct sum of two classes; caller checks the window.
    pub fn sum_of(&self, i: usize, j: usize) -> Result<StratifiedBundle> {
        map_stratified2(&self.sum_bifunctor(), &self.classes[i], &self.classes[j])
    }
}

/// Sites where a candidate bundle makes choices: one fiber dimension per
/// component slot, one label per edge, one fiber map per attached 0-cell.
struct Sites {
    /// (stratum, component key), base stratum first.
    slots: Vec<(usize, CellId)>,
    slot_index: BTreeMap<(usize, CellId), usize>,
    /// (stratum, edge id, slot of its component).
    labels: Vec<(usize, CellId, usize)>,
    /// (layer number starting at 1, attached 0-cell, source slot, target slot).
    attaches: Vec<(usize, CellId, usize, usize)>,
}

fn complex_of<'a>(space: &'a StratifiedSpace, stratum: usize) -> &'a crate::complex::CellComplex {
    if stratum == 0 {
        &space.base0
    } else {
        &space.layers[stratum - 1].m
    }
}

fn site_structure(space: &StratifiedSpace) -> Result<Sites> {
    let asm = assemble(space)?;
    let mut slots = Vec::new();
    let mut slot_index = BTreeMap::new();
    for stratum in 0..=space.layers.len() {
        for key in complex_of(space, stratum).components().keys() {
            slot_index.insert((stratum, key.clone()), slots.len());
            slots.push((stratum, key.clone()));
        }
    }
    let mut labels = Vec::new();
    for stratum in 0..=space.layers.len() {
        let cx = complex_of(space, stratum);
        for (e, _) in cx.cells_of_dim(1) {
            let key = cx.component_key_of(e)?;
            labels.push((stratum, e.clone(), slot_index[&(stratum, key)]));
        }
    }
    let mut attaches = Vec::new();
    for (i, layer) in space.layers.iter().enumerate() {
        for v in &layer.a {
            if layer.m.dim_of(v) != Some(0) {
                continue;
            }
            let src_key = layer.m.component_key_of(v)?;
            let src_slot = slot_index[&(i + 1, src_key)];
            let total = &asm.layer_to_total[i][v];
            let (stratum, orig) = asm
                .origin
                .get(total)
                .ok_or_else(|| Error::Invalid(format!("unresolved total cell {total:?}")))?;
            let tgt_key = complex_of(space, *stratum).component_key_of(orig)?;
            let tgt_slot = slot_index[&(*stratum, tgt_key.clone())];
            attaches.push((i + 1, v.clone(), src_slot, tgt_slot));
        }
    }
    Ok(Sites { slots, slot_index, labels, attaches })
}

fn odometer_next(idx: &mut [usize], radix: &[usize]) -> bool {
    for k in 0..idx.len() {
        idx[k] += 1;
        if idx[k] < radix[k] {
            return true;
        }
        idx[k] = 0;
    }
    false
}

/// Builds one candidate from explicit choices; any validation failure means
/// the choice set is not a stratified bundle and the candidate is dropped.
fn build_candidate(
    space: &StratifiedSpace,
    ambient: &Arc<StructureCategory>,
    sites: &Sites,
    dims: &[usize],
    label_choice: &BTreeMap<CellId, Mor>,
    attach_choice: &BTreeMap<CellId, Mor>,
) -> Result<StratifiedBundle> {
    let bundle_for = |stratum: usize| -> VBundle {
        let cx = complex_of(space, stratum);
        let fiber: BTreeMap<CellId, Obj> = cx
            .components()
            .keys()
            .map(|key| {
                (key.clone(), Obj::new(dims[sites.slot_index[&(stratum, key.clone())]]))
            })
            .collect();
        let labels: BTreeMap<CellId, Mor> = sites
            .labels
            .iter()
            .filter(|(s, _, _)| *s == stratum)
            .map(|(_, e, _)| (e.clone(), label_choice[e].clone()))
            .collect();
        VBundle { base: cx.clone(), category: ambient.clone(), fiber, labels }
    };
    let layer0 = bundle_for(0);
    let mut layers = Vec::new();
    for (i, layer) in space.layers.iter().enumerate() {
        let m_bundle = bundle_for(i + 1);
        let fiber_maps: BTreeMap<CellId, Mor> = sites
            .attaches
            .iter()
            .filter(|(l, _, _, _)| *l == i + 1)
            .map(|(_, v, _, _)| (v.clone(), attach_choice[v].clone()))
            .collect();
        let attach = AttachingVMap::new(&m_bundle, &layer.a, layer.h.clone(), fiber_maps)?;
        layers.push((m_bundle, attach));
    }
    build_stratified(space.clone(), layer0, layers)
}

/// Exhaustive, deterministic enumeration of stratified-bundle classes over
/// the base with all per-slot ranks at most `rank_cap`, followed by the
/// direct-sum closure within the same window.
pub fn enumerate_classes(
    base: &StratifiedSpace,
    category: Arc<StructureCategory>,
    rank_cap: usize,
) -> Result<ClassMonoid> {
    if !category.is_finite() {
        return Err(Error::UnsupportedCategory(format!(
            "class enumeration over {} needs a finite category",
            category.name
        )));
    }
    if !category.contains_object(0) {
        return Err(Error::Invalid(format!(
            "category {} has no zero object, so no zero class exists",
            category.name
        )));
    }
    let ambient: Arc<StructureCategory> =
        if (0..=rank_cap).all(|d| category.contains_object(d)) {
            category.clone()
        } else {
            Arc::new(permutative_closure(&category, rank_cap)?)
        };
    let sites = site_structure(base)?;
    let dims_allowed: Vec<usize> =
        category.objects()?.into_iter().filter(|d| *d <= rank_cap).collect();

    let mut classes: Vec<StratifiedBundle> = Vec::new();
    let mut partial = false;
    let mut built: usize = 0;

    let mut dim_idx = vec![0usize; sites.slots.len()];
    let dim_radix = vec![dims_allowed.len(); sites.slots.len()];
    loop {
        let dims: Vec<usize> = dim_idx.iter().map(|&k| dims_allowed[k]).collect();
        // Candidate label and attach choices for this dimension profile.
        let label_pools: Vec<(CellId, Vec<Mor>)> = sites
            .labels
            .iter()
            .map(|(_, e, slot)| Ok((e.clone(), category.hom(dims[*slot], dims[*slot])?)))
            .collect::<Result<_>>()?;
        let attach_pools: Vec<(CellId, Vec<Mor>)> = sites
            .attaches
            .iter()
            .map(|(_, v, src, tgt)| Ok((v.clone(), category.hom(dims[*src], dims[*tgt])?)))
            .collect::<Result<_>>()?;
        let count: usize = label_pools
            .iter()
            .map(|(_, p)| p.len())
            .chain(attach_pools.iter().map(|(_, p)| p.len()))
            .fold(1usize, |acc, n| acc.saturating_mul(n));
        if count == 0 {
            // Some site has no morphism of the required shape; no bundle
            // realizes this dimension profile.
            if !odometer_next(&mut dim_idx, &dim_radix) {
                break;
            }
            continue;
        }
        if built.saturating_add(count) > ENUMERATION_BUDGET {
            partial = true;
            if !odometer_next(&mut dim_idx, &dim_radix) {
                break;
            }
            continue;
        }
        let radix: Vec<usize> = label_pools
            .iter()
            .map(|(_, p)| p.len())
            .chain(attach_pools.iter().map(|(_, p)| p.len()))
            .collect();
        let mut choice = vec![0usize; radix.len()];
        loop {
            built += 1;
            let label_choice: BTreeMap<CellId, Mor> = label_pools
                .iter()
                .enumerate()
                .map(|(k, (e, pool))| (e.clone(), pool[choice[k]].clone()))
                .collect();
            let attach_choice: BTreeMap<CellId, Mor> = attach_pools
                .iter()
                .enumerate()
                .map(|(k, (v, pool))| {
                    (v.clone(), pool[choice[label_pools.len() + k]].clone())
                })
                .collect();
            if let Ok(candidate) =
                build_candidate(base, &ambient, &sites, &dims, &label_choice, &attach_choice)
            {
                match classify_among(&classes, &candidate)? {
                    Classified::Known(_) => {}
                    Classified::New => classes.push(candidate),
                    Classified::Unsure => partial = true,
                }
            }
            if !odometer_next(&mut choice, &radix) {
                break;
            }
        }
        if !odometer_next(&mut dim_idx, &dim_radix) {
            break;
        }
    }

    if classes.is_empty() || !slot_dims(&classes[0]).iter().all(|d| *d == 0) {
        return Err(Error::Invalid(
            "enumeration produced no zero class; the base admits no empty bundle".to_string(),
        ));
    }

    let mut monoid = ClassMonoid {
        base: base.clone(),
        category,
        ambient,
        rank_cap,
        classes,
        add_table: BTreeMap::new(),
        partial,
    };

    // Direct-sum closure with table fill; new sums within the window become
    // classes of their own.
    let mut i = 0;
    while i < monoid.classes.len() {
        for j in 0..=i {
            let key = (j, i);
            if monoid.add_table.contains_key(&key) {
                continue;
            }
            let di = slot_dims(&monoid.classes[i]);
            let dj = slot_dims(&monoid.classes[j]);
            if di.iter().zip(dj.iter()).any(|(a, b)| a + b > monoid.rank_cap) {
                monoid.add_table.insert(key, SumEntry::OutsideWindow);
                continue;
            }
            let sum = monoid.sum_of(j, i)?;
            let entry = match monoid.classify_full(&sum)? {
                Classified::Known(k) => SumEntry::Class(k),
                Classified::New => {
                    monoid.classes.push(sum);
                    SumEntry::Class(monoid.classes.len() - 1)
                }
                Classified::Unsure => {
                    monoid.partial = true;
                    SumEntry::Unknown
                }
            };
            monoid.add_table.insert(key, entry);
        }
        i += 1;
    }
    Ok(monoid)
}

/// Element of the presented group: torsion coordinates (one per divisor
/// greater than one, reduced) followed by free coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KElement {
    pub torsion: Vec<BigInt>,
    pub free: Vec<BigInt>,
}

impl KElement {
    pub fn is_zero(&self) -> bool {
        self.torsion.iter().all(|x| x.is_zero()) && self.free.iter().all(|x| x.is_zero())
    }
}

fn rem_euclid(x: &BigInt, d: &BigInt) -> BigInt {
    let r = x % d;
    if r.is_negative() {
        r + d.abs()
    } else {
        r
    }
}

/// The Grothendieck group of a class monoid, presented by Smith normal form.
#[derive(Debug, Clone)]
pub struct KGroup {
    pub monoid: ClassMonoid,
    /// Class indices of the generators (all nonzero classes, in order).
    pub generators: Vec<usize>,
    /// One row per verified sum: e_i + e_j - e_k over the generators.
    pub relations: ZMat,
    pub snf: Snf,
    /// Nonzero diagonal divisors, in chain order.
    pub divisors: Vec<BigInt>,
    /// Divisors greater than one.
    pub torsion: Vec<BigInt>,
    pub free_rank: usize,
    /// Display form such as `"Z^2"` or `"Z (+) Z/2"`, `"0"` when trivial.
    pub presentation: String,
    /// The rank window the presentation is valid for.
    pub window: usize,
}

pub fn presentation_string(free_rank: usize, torsion: &[BigInt]) -> String {
    let mut parts = Vec::new();
    match free_rank {
        0 => {}
        1 => parts.push("Z".to_string()),
        r => parts.push(format!("Z^{r}")),
    }
    for d in torsion {
        parts.push(format!("Z/{d}"));
    }
    if parts.is_empty() {
        "0".to_string()
    } else {
        parts.join(" (+) ")
    }
}

/// Completes the monoid to its Grothendieck group: free abelian on the
/// nonzero classes modulo the verified sum relations.
pub fn grothendieck(monoid: ClassMonoid) -> Result<KGroup> {
    let zero = monoid.zero_index();
    let generators: Vec<usize> = (0..monoid.classes.len()).filter(|&i| i != zero).collect();
    let gen_pos: BTreeMap<usize, usize> =
        generators.iter().enumerate().map(|(pos, &cls)| (cls, pos)).collect();

    let mut rows: Vec<Vec<BigInt>> = Vec::new();
    for (&(i, j), entry) in &monoid.add_table {
        let SumEntry::Class(k) = entry else { continue };
        if i == zero || j == zero {
            let other = if i == zero { j } else { i };
            if *k != other {
                return Err(Error::Invalid(format!(
                    "zero class is not neutral: [{i}]+[{j}] = [{k}]"
                )));
            }
            continue;
        }
        let mut row = vec![BigInt::zero(); generators.len()];
        row[gen_pos[&i]] += BigInt::one();
        row[gen_pos[&j]] += BigInt::one();
        if *k != zero {
            row[gen_pos[k]] -= BigInt::one();
        }
        rows.push(row);
    }
    let relations = if rows.is_empty() {
        ZMat::zero(0, generators.len())
    } else {
        ZMat::from_rows(rows)?
    };
    let snf = smith_normal_form(&relations.transpose());
    let divisors = snf.divisors();
    let torsion: Vec<BigInt> = divisors.iter().filter(|d| **d > BigInt::one()).cloned().collect();
    let free_rank = generators.len() - divisors.len();
    let presentation = presentation_string(free_rank, &torsion);
    Ok(KGroup {
        window: monoid.rank_cap,
        monoid,
        generators,
        relations,
        snf,
        divisors,
        torsion,
        free_rank,
        presentation,
    })
}

impl KGroup {
    pub fn zero_element(&self) -> KElement {
        KElement {
            torsion: vec![BigInt::zero(); self.torsion.len()],
            free: vec![BigInt::zero(); self.free_rank],
        }
    }

    /// Image of a monoid class in the presented group: the generator basis
    /// vector rewritten through the diagonalizing transform.
    pub fn class_map(&self, class_index: usize) -> Result<KElement> {
        if class_index >= self.monoid.classes.len() {
            return Err(Error::Invalid(format!("no class {class_index}")));
        }
        if class_index == self.monoid.zero_index() {
            return Ok(self.zero_element());
        }
        let pos = self
            .generators
            .iter()
            .position(|&c| c == class_index)
            .expect("nonzero classes are generators");
        let y = self.snf.u.col(pos);
        self.element_from_coords(&y)
    }

    /// Reduces raw coordinates in the diagonal basis to a group element.
    fn element_from_coords(&self, y: &[BigInt]) -> Result<KElement> {
        if y.len() != self.generators.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} coordinates, got {}",
                self.generators.len(),
                y.len()
            )));
        }
        let mut torsion = Vec::new();
        for (t, d) in self.divisors.iter().enumerate() {
            if *d > BigInt::one() {
                torsion.push(rem_euclid(&y[t], d));
            }
        }
        Ok(KElement { torsion, free: y[self.divisors.len()..].to_vec() })
    }

    pub fn add(&self, a: &KElement, b: &KElement) -> Result<KElement> {
        if a.torsion.len() != b.torsion.len() || a.free.len() != b.free.len() {
            return Err(Error::DimensionMismatch("group element shapes differ".to_string()));
        }
        let torsion = a
            .torsion
            .iter()
            .zip(&b.torsion)
            .zip(&self.torsion)
            .map(|((x, y), d)| rem_euclid(&(x + y), d))
            .collect();
        let free = a.free.iter().zip(&b.free).map(|(x, y)| x + y).collect();
        Ok(KElement { torsion, free })
    }

    pub fn scale(&self, a: &KElement, c: i64) -> KElement {
        let c = BigInt::from(c);
        KElement {
            torsion: a
                .torsion
                .iter()
                .zip(&self.torsion)
                .map(|(x, d)| rem_euclid(&(x * &c), d))
                .collect(),
            free: a.free.iter().map(|x| x * &c).collect(),
        }
    }

    /// Integer combination of monoid classes as a group element.
    pub fn combo(&self, terms: &[(usize, i64)]) -> Result<KElement> {
        let mut acc = self.zero_element();
        for &(cls, coeff) in terms {
            let img = self.scale(&self.class_map(cls)?, coeff);
            acc = self.add(&acc, &img)?;
        }
        Ok(acc)
    }
}

/// Invariant gate for a computed group: divisor chain and additivity of the
/// class map over every verified table entry.
pub fn validate_kgroup(k: &KGroup) -> Result<ValidationReport> {
    let mut report = ValidationReport::new(format!(
        "K-group over {} within window {}",
        k.monoid.category.name, k.window
    ));
    for w in k.divisors.windows(2) {
        if !(&w[1] % &w[0]).is_zero() {
            report.push("divisor-chain", format!("{} does not divide {}", w[0], w[1]));
        }
    }
    for (&(i, j), entry) in &k.monoid.add_table {
        let SumEntry::Class(sum) = entry else { continue };
        let lhs = k.add(&k.class_map(i)?, &k.class_map(j)?)?;
        let rhs = k.class_map(*sum)?;
        if lhs != rhs {
            report.push(
                "class-map-additivity",
                format!("classes {i}+{j}={sum} break additivity"),
            );
        }
    }
    Ok(report)
}

/// Restriction targets: the base stratum or one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RestrictTarget {
    Base,
    Layer(usize),
}

/// Forgets all but one stratum of a class representative.
pub fn restrict_class(b: &StratifiedBundle, target: RestrictTarget) -> Result<StratifiedBundle> {
    match target {
        RestrictTarget::Base => Ok(StratifiedBundle::one_stratum(b.layer0.clone())),
        RestrictTarget::Layer(i) => {
            let (m, _) = b
                .layers
                .get(i)
                .ok_or_else(|| Error::Invalid(format!("no layer {i} to restrict to")))?;
            Ok(StratifiedBundle::one_stratum(m.clone()))
        }
    }
}

/// A homomorphism out of one computed K-group into another, described by
/// the images of all monoid classes.
#[derive(Debug, Clone)]
pub struct GroupHom {
    /// Target class index for each source class index, when classified.
    pub image_classes: Vec<Option<usize>>,
    /// Target group element for each source class index.
    pub images: Vec<Option<KElement>>,
    /// Additivity verified over every fully classified source table entry.
    pub additive: bool,
    /// Set when some representative fell outside the target window.
    pub partial: bool,
}

fn hom_from_images(
    src: &KGroup,
    tgt: &KGroup,
    image_classes: Vec<Option<usize>>,
) -> Result<GroupHom> {
    let mut images = Vec::with_capacity(image_classes.len());
    for cls in &image_classes {
        images.push(match cls {
            Some(k) => Some(tgt.class_map(*k)?),
            None => None,
        });
    }
    let partial = image_classes.iter().any(|c| c.is_none());
    let mut additive = true;
    for (&(i, j), entry) in &src.monoid.add_table {
        let SumEntry::Class(k) = entry else { continue };
        let (Some(a), Some(b), Some(c)) = (&images[i], &images[j], &images[*k]) else {
            continue;
        };
        if &tgt.add(a, b)? != c {
            additive = false;
        }
    }
    Ok(GroupHom { image_classes, images, additive, partial })
}

/// The homomorphism induced by restricting every class representative to
/// the base stratum or to one layer, classified in the target group.
pub fn restriction_hom(
    k: &KGroup,
    target: RestrictTarget,
    k_target: &KGroup,
) -> Result<GroupHom> {
    let mut image_classes = Vec::new();
    for rep in &k.monoid.classes {
        let restricted = restrict_class(rep, target)?;
        image_classes.push(k_target.monoid.classify(&restricted)?);
    }
    hom_from_images(k, k_target, image_classes)
}

/// The contravariant homomorphism induced by a stratum-preserving map of
/// assembled totals: classes over the map's codomain pull back to classes
/// over its domain.
pub fn pullback_hom(f: &CellularMap, k_src: &KGroup, k_tgt: &KGroup) -> Result<GroupHom> {
    let mut image_classes = Vec::new();
    for rep in &k_src.monoid.classes {
        let pulled = pullback_stratified(&k_tgt.monoid.base, f, rep)?;
        image_classes.push(k_tgt.monoid.classify(&pulled)?);
    }
    hom_from_images(k_src, k_tgt, image_classes)
}

/// Writes a homomorphism as an integer matrix over chosen free bases: the
/// selected classes must map to bases of the free parts on both sides.
pub fn hom_matrix_in_basis(
    hom: &GroupHom,
    k_src: &KGroup,
    k_tgt: &KGroup,
    src_basis: &[usize],
    tgt_basis: &[usize],
) -> Result<ZMat> {
    if !k_src.torsion.is_empty() || !k_tgt.torsion.is_empty() {
        return Err(Error::Invalid("basis matrices need torsion-free groups".to_string()));
    }
    if tgt_basis.len() != k_tgt.free_rank {
        return Err(Error::Invalid(format!(
            "target basis needs {} classes, got {}",
            k_tgt.free_rank,
            tgt_basis.len()
        )));
    }
    // Columns of b are the chosen target classes in presentation coordinates.
    let mut b = ZMat::zero(k_tgt.free_rank, tgt_basis.len());
    for (col, &cls) in tgt_basis.iter().enumerate() {
        let el = k_tgt.class_map(cls)?;
        for (row, x) in el.free.iter().enumerate() {
            b.set(row, col, x.clone());
        }
    }
    let bq = b.to_qmat();
    let b_inv = bq
        .inverse()
        .ok_or_else(|| Error::Invalid("chosen target classes are not a basis".to_string()))?;
    let mut out = ZMat::zero(tgt_basis.len(), src_basis.len());
    for (col, &cls) in src_basis.iter().enumerate() {
        let img = hom.images[cls]
            .as_ref()
            .ok_or_else(|| Error::Invalid(format!("class {cls} has no classified image")))?;
        let mut y = crate::matrix::QMat::zero(k_tgt.free_rank, 1);
        for (row, x) in img.free.iter().enumerate() {
            y.set(row, 0, crate::matrix::Q::from(x.clone()));
        }
        let coords = b_inv.mul(&y)?;
        for row in 0..tgt_basis.len() {
            let v = coords.at(row, 0);
            if !v.is_integer() {
                return Err(Error::Invalid(
                    "image does not lie in the integer span of the basis".to_string(),
                ));
            }
            out.set(row, col, v.to_integer());
        }
    }
    Ok(out)
}

/// Bilinear product on the group induced by the tensor product of
/// representatives: `[E] . [F] = [E (x) F]`, extended over integer combos.
pub fn ring_product(
    k: &KGroup,
    a: &[(usize, i64)],
    b: &[(usize, i64)],
) -> Result<KElement> {
    if !k.monoid.category.flags.has_tensor {
        return Err(Error::UnsupportedCategory(format!(
            "category {} has no tensor product",
            k.monoid.category.name
        )));
    }
    let bf = MatrixBifunctor::new(
        "otimes",
        k.monoid.ambient.clone(),
        k.monoid.ambient.clone(),
        k.monoid.ambient.clone(),
        BifunctorRule::Tensor,
    );
    let mut acc = k.zero_element();
    for &(i, ci) in a {
        for &(j, cj) in b {
            let ei = k.monoid.classes.get(i).ok_or_else(|| Error::Invalid(format!("no class {i}")))?;
            let ej = k.monoid.classes.get(j).ok_or_else(|| Error::Invalid(format!("no class {j}")))?;
            let di = slot_dims(ei);
            let dj = slot_dims(ej);
            if di.iter().zip(dj.iter()).any(|(x, y)| x * y > k.window) {
                return Err(Error::Invalid(format!(
                    "product of classes {i} and {j} leaves the stable window {}",
                    k.window
                )));
            }
            let product = map_stratified2(&bf, ei, ej)?;
            let cls = k.monoid.classify(&product)?.ok_or_else(|| {
                Error::Invalid(format!("product of classes {i} and {j} matched no class"))
            })?;
            let term = k.scale(&k.class_map(cls)?, ci * cj);
            acc = k.add(&acc, &term)?;
        }
    }
    Ok(acc)
}

/// The class of the everywhere-trivial line bundle, the ring unit.
pub fn unit_class(k: &KGroup) -> Result<usize> {
    let space = &k.monoid.base;
    let sites = site_structure(space)?;
    let dims = vec![1usize; sites.slots.len()];
    let labels: BTreeMap<CellId, Mor> =
        sites.labels.iter().map(|(_, e, _)| (e.clone(), Mor::identity(1))).collect();
    let attaches: BTreeMap<CellId, Mor> =
        sites.attaches.iter().map(|(_, v, _, _)| (v.clone(), Mor::identity(1))).collect();
    let unit = build_candidate(space, &k.monoid.ambient, &sites, &dims, &labels, &attaches)?;
    k.monoid
        .classify(&unit)?
        .ok_or_else(|| Error::Invalid("trivial line class is not in the window".to_string()))
}

/// Indices of classes isomorphic to the given bundles; a convenience for
/// naming generators in reports and tests.
pub fn locate_classes(
    monoid: &ClassMonoid,
    reps: &[StratifiedBundle],
) -> Result<Vec<Option<usize>>> {
    reps.iter().map(|b| monoid.classify(b)).collect()
}

/// Presents the quotient of a free abelian group by explicit relation rows;
/// used directly when no monoid is in play.
pub fn quotient_presentation(gen_count: usize, rows: Vec<Vec<i64>>) -> Result<(Snf, Vec<BigInt>, usize)> {
    let rows_big: Vec<Vec<BigInt>> =
        rows.into_iter().map(|r| r.into_iter().map(BigInt::from).collect()).collect();
    for r in &rows_big {
        if r.len() != gen_count {
            return Err(Error::Invalid(
                "relation row width differs from generator count".to_string(),
            ));
        }
    }
    let rel = if rows_big.is_empty() {
        ZMat::zero(0, gen_count)
    } else {
        ZMat::from_rows(rows_big)?
    };
    let snf = smith_normal_form(&rel.transpose());
    let divisors = snf.divisors();
    let torsion: Vec<BigInt> = divisors.iter().filter(|d| **d > BigInt::one()).cloned().collect();
    let free_rank = gen_count - divisors.len();
    Ok((snf, torsion, free_rank))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{circle, circle_bundle, circle_self_map, disc_space, mobius_bundle, point};
    use std::collections::BTreeSet;

    fn sp1() -> Arc<StructureCategory> {
        Arc::new(StructureCategory::signed_perm(1))
    }

    fn circle_space() -> StratifiedSpace {
        StratifiedSpace::base_only(circle())
    }

    fn circle_monoid(cap: usize) -> ClassMonoid {
        enumerate_classes(&circle_space(), sp1(), cap).unwrap()
    }

    /// Indices of the trivial and Moebius line classes in a circle monoid.
    fn t_and_m(monoid: &ClassMonoid) -> (usize, usize) {
        let t = StratifiedBundle::one_stratum(circle_bundle(
            monoid.ambient.clone(),
            Mor::identity(1),
        ));
        let m = StratifiedBundle::one_stratum(VBundle {
            category: monoid.ambient.clone(),
            ..mobius_bundle()
        });
        (
            monoid.classify(&t).unwrap().expect("trivial line is enumerated"),
            monoid.classify(&m).unwrap().expect("moebius line is enumerated"),
        )
    }

    #[test]
    fn point_classes_count_ranks_up_to_the_cap() {
        let space = StratifiedSpace::base_only(point("pt"));
        let monoid = enumerate_classes(&space, sp1(), 2).unwrap();
        assert_eq!(monoid.classes.len(), 3);
        assert!(!monoid.partial);
        let k = grothendieck(monoid).unwrap();
        assert_eq!(k.presentation, "Z");
        validate_kgroup(&k).unwrap().into_result().unwrap();
        let rank1 = k.class_map(k.generators[0]).unwrap();
        let rank2 = k.class_map(k.generators[1]).unwrap();
        assert_eq!(k.add(&rank1, &rank1).unwrap(), rank2);
    }

    #[test]
    fn circle_monoid_has_six_classes_and_separates_the_plane_bundles() {
        let monoid = circle_monoid(2);
        assert_eq!(monoid.classes.len(), 6);
        assert!(!monoid.partial);
        let (t, m) = t_and_m(&monoid);
        let tt = match monoid.add_table[&(t, t)] {
            SumEntry::Class(k) => k,
            ref e => panic!("T+T should be classified, got {e:?}"),
        };
        let key = (t.min(m), t.max(m));
        let SumEntry::Class(_tm) = monoid.add_table[&key] else { panic!("T+M missing") };
        let mm = match monoid.add_table[&(m, m)] {
            SumEntry::Class(k) => k,
            ref e => panic!("M+M should be classified, got {e:?}"),
        };
        assert_ne!(tt, mm, "M (+) M and the trivial plane bundle stay distinct");
    }

    #[test]
    fn circle_group_is_free_on_the_two_line_classes() {
        let k = grothendieck(circle_monoid(2)).unwrap();
        assert_eq!(k.presentation, "Z^2");
        assert!(k.torsion.is_empty());
        validate_kgroup(&k).unwrap().into_result().unwrap();
        let (t, m) = t_and_m(&k.monoid);
        // M+M and T+T differ in the group as well.
        let two_m = k.scale(&k.class_map(m).unwrap(), 2);
        let two_t = k.scale(&k.class_map(t).unwrap(), 2);
        assert_ne!(two_m, two_t);
    }

    #[test]
    fn sums_beyond_the_window_are_marked_not_guessed() {
        let monoid = circle_monoid(2);
        let (t, _) = t_and_m(&monoid);
        let SumEntry::Class(tt) = monoid.add_table[&(t, t)] else { panic!() };
        let key = (t.min(tt), t.max(tt));
        assert_eq!(monoid.add_table[&key], SumEntry::OutsideWindow);
    }

    #[test]
    fn idempotent_generators_vanish_in_the_quotient() {
        // Two generators a, b with the single relation a + a = a.
        let (snf, torsion, free_rank) = quotient_presentation(2, vec![vec![1, 0]]).unwrap();
        assert!(torsion.is_empty());
        assert_eq!(free_rank, 1);
        // a itself maps to zero in the free part.
        let a_coords = snf.u.col(0);
        assert!(a_coords[snf.divisors().len()..].iter().all(|x| x.is_zero()));
    }

    #[test]
    fn disc_model_enumeration_respects_attach_naturality() {
        let monoid = enumerate_classes(&disc_space(), sp1(), 1).unwrap();
        assert!(!monoid.partial);
        // Only the zero bundle and the flat disc survive: a rank mismatch
        // between the strata has no signed-permutation attach morphism, and
        // a Moebius boundary circle cannot extend over a flat square.
        assert_eq!(monoid.classes.len(), 2);
        let dims: BTreeSet<Vec<usize>> = monoid.classes.iter().map(slot_dims).collect();
        assert_eq!(dims, BTreeSet::from([vec![0, 0], vec![1, 1]]));
        let flat = &monoid.classes[1];
        assert_eq!(
            flat.layer0.labels["e"],
            Mor::identity(1),
            "naturality around the attached square forces trivial boundary holonomy"
        );
    }

    #[test]
    fn disc_class_restricts_to_the_trivial_line_on_each_stratum() {
        let disc_k = grothendieck(enumerate_classes(&disc_space(), sp1(), 1).unwrap()).unwrap();
        let circle_k = grothendieck(circle_monoid(1)).unwrap();
        let to_base = restriction_hom(&disc_k, RestrictTarget::Base, &circle_k).unwrap();
        assert!(to_base.additive && !to_base.partial);
        let (t_circle, m_circle) = t_and_m(&circle_k.monoid);
        let flat = 1;
        assert_eq!(to_base.image_classes[flat], Some(t_circle));
        assert!(
            !to_base.image_classes.contains(&Some(m_circle)),
            "no disc class has Moebius boundary holonomy"
        );
        // The layer restriction lands in the trivial line over the square.
        let square = StratifiedSpace::base_only(disc_space().layers[0].m.clone());
        let square_k = grothendieck(enumerate_classes(&square, sp1(), 1).unwrap()).unwrap();
        assert_eq!(square_k.monoid.classes.len(), 2);
        let to_layer = restriction_hom(&disc_k, RestrictTarget::Layer(0), &square_k).unwrap();
        assert!(to_layer.additive && !to_layer.partial);
        assert_eq!(to_layer.image_classes[flat], Some(1));
    }

    #[test]
    fn degree_two_pullback_matrix_in_the_line_basis() {
        let k = grothendieck(circle_monoid(2)).unwrap();
        let space = circle_space();
        let asm = assemble(&space).unwrap();
        let mut f = circle_self_map(2);
        f.src = asm.total.clone();
        f.dst = asm.total.clone();
        let hom = pullback_hom(&f, &k, &k).unwrap();
        assert!(hom.additive);
        let (t, m) = t_and_m(&k.monoid);
        let matrix = hom_matrix_in_basis(&hom, &k, &k, &[t, m], &[t, m]).unwrap();
        assert_eq!(matrix, ZMat::from_i64(&[&[1, 1], &[0, 0]]));
    }

    #[test]
    fn identity_pullback_is_the_identity_hom() {
        let k = grothendieck(circle_monoid(2)).unwrap();
        let asm = assemble(&circle_space()).unwrap();
        let f = CellularMap::identity(&asm.total);
        let hom = pullback_hom(&f, &k, &k).unwrap();
        assert!(hom.additive && !hom.partial);
        for (i, img) in hom.image_classes.iter().enumerate() {
            assert_eq!(*img, Some(i));
        }
    }

    #[test]
    fn mobius_squares_to_the_unit_in_the_ring() {
        let k = grothendieck(circle_monoid(2)).unwrap();
        let (t, m) = t_and_m(&k.monoid);
        let unit = unit_class(&k).unwrap();
        assert_eq!(unit, t);
        let mm = ring_product(&k, &[(m, 1)], &[(m, 1)]).unwrap();
        assert_eq!(mm, k.class_map(t).unwrap());
        let um = ring_product(&k, &[(unit, 1)], &[(m, 1)]).unwrap();
        assert_eq!(um, k.class_map(m).unwrap());
        // (T + M) . M = M + T, checked bilinearly.
        let lhs = ring_product(&k, &[(t, 1), (m, 1)], &[(m, 1)]).unwrap();
        let rhs = k.add(&k.class_map(m).unwrap(), &k.class_map(t).unwrap()).unwrap();
        assert_eq!(lhs, rhs);
    }
}
