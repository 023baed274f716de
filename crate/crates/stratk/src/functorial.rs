//! Images of bundles and stratified bundles under functors and bifunctors
//! of structure categories, applied labelwise over a fixed base.

use std::collections::BTreeMap;

use crate::bundle::{restriction, validate_bundle, VBundle};
use crate::error::{Error, Result};
use crate::lincat::{apply_bifunctor, apply_functor, MatrixBifunctor, MatrixFunctor, Obj};
use crate::strata::{build_stratified, AttachingVMap, StratifiedBundle};

/// Image of a bundle under a functor: fibers through the object rule,
/// labels through the morphism rule, over the same base complex.
pub fn map_bundle(functor: &MatrixFunctor, bundle: &VBundle) -> Result<VBundle> {
    if *functor.source != *bundle.category {
        return Err(Error::FunctorDomain(format!(
            "bundle over {} cannot feed functor {} from {}",
            bundle.category.name, functor.name, functor.source.name
        )));
    }
    let mut fiber = BTreeMap::new();
    for (key, obj) in &bundle.fiber {
        fiber.insert(key.clone(), Obj::new(functor.obj_image(obj.dim)?));
    }
    let mut labels = BTreeMap::new();
    for (edge, label) in &bundle.labels {
        labels.insert(edge.clone(), apply_functor(functor, label)?);
    }
    let out = VBundle {
        base: bundle.base.clone(),
        category: functor.target.clone(),
        fiber,
        labels,
    };
    validate_bundle(&out).into_result()?;
    Ok(out)
}

/// Image of a pair of bundles over one base under a bifunctor.
pub fn map_bundle2(bf: &MatrixBifunctor, e: &VBundle, f: &VBundle) -> Result<VBundle> {
    if e.base != f.base {
        return Err(Error::Invalid(format!(
            "bifunctor {} needs both bundles over one base complex",
            bf.name
        )));
    }
    if *bf.left != *e.category || *bf.right != *f.category {
        return Err(Error::FunctorDomain(format!(
            "bundle categories ({}, {}) differ from the sources of bifunctor {}",
            e.category.name, f.category.name, bf.name
        )));
    }
    let mut fiber = BTreeMap::new();
    for (key, obj) in &e.fiber {
        let other = f
            .fiber
            .get(key)
            .ok_or_else(|| Error::Invalid(format!("no fiber over component {key:?}")))?;
        fiber.insert(key.clone(), Obj::new(bf.obj_image(obj.dim, other.dim)?));
    }
    let mut labels = BTreeMap::new();
    for (edge, label) in &e.labels {
        let other = f
            .labels
            .get(edge)
            .ok_or_else(|| Error::Invalid(format!("no label on edge {edge:?}")))?;
        labels.insert(edge.clone(), apply_bifunctor(bf, label, other)?);
    }
    let out = VBundle { base: e.base.clone(), category: bf.target.clone(), fiber, labels };
    validate_bundle(&out).into_result()?;
    Ok(out)
}

/// Image of a stratified bundle under a functor, by induction over the
/// strata: every layer bundle and every attaching fiber map goes through
/// the functor, and naturality is re-verified on the result.
pub fn map_stratified(
    functor: &MatrixFunctor,
    x: &StratifiedBundle,
) -> Result<StratifiedBundle> {
    let layer0 = map_bundle(functor, &x.layer0)?;
    let mut layers = Vec::new();
    for (idx, (m_bundle, attach)) in x.layers.iter().enumerate() {
        let m_new = map_bundle(functor, m_bundle)?;
        let mut fiber_maps = BTreeMap::new();
        for (v, phi) in &attach.fiber_maps {
            fiber_maps.insert(v.clone(), apply_functor(functor, phi)?);
        }
        let attached = x.space.layers[idx].a.clone();
        let src = restriction(&m_new, &attached)?;
        layers.push((
            m_new,
            AttachingVMap { src, base_map: attach.base_map.clone(), fiber_maps },
        ));
    }
    build_stratified(x.space.clone(), layer0, layers)
}

/// Image of a pair of stratified bundles over one stratified base under a
/// bifunctor: layer bundles pair up layerwise and each attaching fiber map
/// is the bifunctor image of the two attach maps at that vertex.
pub fn map_stratified2(
    bf: &MatrixBifunctor,
    x: &StratifiedBundle,
    y: &StratifiedBundle,
) -> Result<StratifiedBundle> {
    if x.space != y.space {
        return Err(Error::Invalid(format!(
            "bifunctor {} needs both objects over one stratified base",
            bf.name
        )));
    }
    let layer0 = map_bundle2(bf, &x.layer0, &y.layer0)?;
    let mut layers = Vec::new();
    for (idx, (mx, ax)) in x.layers.iter().enumerate() {
        let (my, ay) = &y.layers[idx];
        let m_new = map_bundle2(bf, mx, my)?;
        let mut fiber_maps = BTreeMap::new();
        for (v, phi_x) in &ax.fiber_maps {
            let phi_y = ay
                .fiber_maps
                .get(v)
                .ok_or_else(|| Error::Invalid(format!("no fiber map at vertex {v:?}")))?;
            fiber_maps.insert(v.clone(), apply_bifunctor(bf, phi_x, phi_y)?);
        }
        let attached = x.space.layers[idx].a.clone();
        let src = restriction(&m_new, &attached)?;
        layers.push((
            m_new,
            AttachingVMap { src, base_map: ax.base_map.clone(), fiber_maps },
        ));
    }
    build_stratified(x.space.clone(), layer0, layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::is_isomorphic;
    use crate::fixtures::{circle_bundle, disc_tangent_model, mobius_annulus_model, mobius_bundle};
    use crate::lincat::{BifunctorRule, FunctorRule, Mor, StructureCategory};
    use crate::matrix::QMat;
    use std::collections::BTreeSet;
    use std::sync::Arc;

    fn sp(n: usize) -> Arc<StructureCategory> {
        Arc::new(StructureCategory::signed_perm(n))
    }

    fn mor(rows: &[&[i64]]) -> Mor {
        Mor::new(QMat::from_i64(rows))
    }

    #[test]
    fn identity_functor_preserves_the_bundle() {
        let functor = MatrixFunctor::new("id", sp(1), sp(1), FunctorRule::Identity);
        let e = mobius_bundle();
        assert_eq!(map_bundle(&functor, &e).unwrap(), e);
    }

    #[test]
    fn determinant_of_the_swap_is_the_mobius_bundle() {
        let functor = MatrixFunctor::new("det", sp(2), sp(1), FunctorRule::Determinant);
        let swap = circle_bundle(sp(2), mor(&[&[0, 1], &[1, 0]]));
        let image = map_bundle(&functor, &swap).unwrap();
        assert_eq!(image.labels["e"], mor(&[&[-1]]));
        assert!(is_isomorphic(&image, &mobius_bundle()).unwrap().is_some());
    }

    #[test]
    fn mobius_tensor_mobius_is_trivial() {
        let bf = MatrixBifunctor::new("tensor", sp(1), sp(1), sp(1), BifunctorRule::Tensor);
        let m = mobius_bundle();
        let image = map_bundle2(&bf, &m, &m).unwrap();
        let trivial = VBundle::trivial(m.base.clone(), sp(1), 1).unwrap();
        assert!(is_isomorphic(&image, &trivial).unwrap().is_some());
    }

    #[test]
    fn mobius_sum_mobius_is_not_the_trivial_plane_bundle() {
        let bf = MatrixBifunctor::new("sum", sp(1), sp(1), sp(2), BifunctorRule::DirectSum);
        let m = mobius_bundle();
        let image = map_bundle2(&bf, &m, &m).unwrap();
        assert_eq!(image.labels["e"], mor(&[&[-1, 0], &[0, -1]]));
        let trivial = VBundle::trivial(m.base.clone(), sp(2), 2).unwrap();
        // The holonomy -I is central, so no gauge removes it.
        assert!(is_isomorphic(&image, &trivial).unwrap().is_none());
    }

    #[test]
    fn hom_bifunctor_untwists_the_mobius_pair() {
        let bf = MatrixBifunctor::new("hom", sp(1), sp(1), sp(1), BifunctorRule::Hom);
        let m = mobius_bundle();
        let image = map_bundle2(&bf, &m, &m).unwrap();
        assert!(image.labels["e"].is_identity());
    }

    #[test]
    fn bifunctor_requires_a_common_base() {
        let bf = MatrixBifunctor::new("sum", sp(1), sp(1), sp(2), BifunctorRule::DirectSum);
        let m = mobius_bundle();
        let other = VBundle::trivial(crate::fixtures::interval(), sp(1), 1).unwrap();
        assert!(map_bundle2(&bf, &m, &other).is_err());
    }

    #[test]
    fn table_functor_outside_its_domain_errors() {
        let table = MatrixFunctor::new(
            "partial",
            sp(1),
            sp(1),
            FunctorRule::Table {
                obj_map: [(0, 0), (1, 1)].into_iter().collect(),
                mor_map: [
                    (Mor::identity(0), Mor::identity(0)),
                    (Mor::identity(1), Mor::identity(1)),
                ]
                .into_iter()
                .collect(),
            },
        );
        match map_bundle(&table, &mobius_bundle()) {
            Err(Error::FunctorDomain(_)) => {}
            other => panic!("expected a functor-domain error, got {other:?}"),
        }
    }

    #[test]
    fn zero_functor_collapses_a_stratified_bundle() {
        let functor = MatrixFunctor::new("zero", sp(1), sp(1), FunctorRule::ZeroObject);
        let x = mobius_annulus_model();
        let image = map_stratified(&functor, &x).unwrap();
        for dims in image.stratum_fiber_dims() {
            assert_eq!(dims, BTreeSet::from([0]));
        }
    }

    #[test]
    fn identity_functor_preserves_a_stratified_bundle() {
        let functor = MatrixFunctor::new("id", sp(1), sp(1), FunctorRule::Identity);
        let x = mobius_annulus_model();
        assert_eq!(map_stratified(&functor, &x).unwrap(), x);
    }

    #[test]
    fn determinant_rejects_rank_dropping_attaches() {
        let open2 = Arc::new(StructureCategory::vect_open(2));
        let open1 = Arc::new(StructureCategory::vect_open(1));
        let functor = MatrixFunctor::new("det", open2, open1, FunctorRule::Determinant);
        match map_stratified(&functor, &disc_tangent_model()) {
            Err(Error::FunctorDomain(msg)) => assert!(msg.contains("square")),
            other => panic!("expected a functor-domain error, got {other:?}"),
        }
    }

    #[test]
    fn stratified_sum_doubles_the_fiber_dimensions() {
        let open2 = Arc::new(StructureCategory::vect_open(2));
        let open4 = Arc::new(StructureCategory::vect_open(4));
        let bf = MatrixBifunctor::new(
            "sum",
            open2.clone(),
            open2,
            open4,
            BifunctorRule::DirectSum,
        );
        let x = disc_tangent_model();
        let doubled = map_stratified2(&bf, &x, &x).unwrap();
        let dims = doubled.stratum_fiber_dims();
        assert_eq!(dims[0], BTreeSet::from([2]));
        assert_eq!(dims[1], BTreeSet::from([4]));
    }

    #[test]
    fn stratified_bifunctor_requires_a_common_space() {
        let bf = MatrixBifunctor::new("sum", sp(1), sp(1), sp(2), BifunctorRule::DirectSum);
        let x = mobius_annulus_model();
        let y = StratifiedBundle::one_stratum(mobius_bundle());
        assert!(map_stratified2(&bf, &x, &y).is_err());
    }
}
