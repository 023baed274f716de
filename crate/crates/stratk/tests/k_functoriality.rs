//! Consumer-side checks of the K-theory layer through the public API:
//! presentation invariance, contravariant functoriality of pullback,
//! the rank isomorphism over a point, homotopy invariance of induced
//! homomorphisms, and the ring structure on the circle.

use std::collections::BTreeMap;
use std::sync::Arc;

use stratk::complex::{assemble, compose_cellular, CellularMap, StratifiedSpace};
use stratk::fixtures;
use stratk::ktheory::{
    enumerate_classes, grothendieck, pullback_hom, ring_product, unit_class, ClassMonoid,
    KGroup, SumEntry,
};
use stratk::lincat::StructureCategory;
use stratk::strata::homotopy_end_maps;

fn circle_group(cap: usize) -> KGroup {
    let sp1 = Arc::new(StructureCategory::signed_perm(1));
    let space = StratifiedSpace::base_only(fixtures::circle());
    grothendieck(enumerate_classes(&space, sp1, cap).unwrap()).unwrap()
}

/// Degree-d self map of the assembled circle total, stratum tags included.
fn degree_total(degree: usize) -> CellularMap {
    let space = StratifiedSpace::base_only(fixtures::circle());
    let total = assemble(&space).unwrap().total;
    let mut f = fixtures::circle_self_map(degree);
    f.src = total.clone();
    f.dst = total;
    f
}

fn line_class(k: &KGroup, twisted: bool) -> usize {
    (0..k.monoid.classes.len())
        .find(|&i| {
            let b = &k.monoid.classes[i].layer0;
            b.fiber.values().map(|o| o.dim).sum::<usize>() == 1
                && b.labels.values().any(|l| !l.is_identity()) == twisted
        })
        .expect("line class present")
}

#[test]
fn presentation_is_invariant_under_generator_reordering() {
    let k = circle_group(2);
    let n = k.monoid.classes.len();
    assert!(n > 2);

    // Permutations fixing the zero class: reversal and a transposition.
    let mut perms: Vec<Vec<usize>> = Vec::new();
    let mut rev: Vec<usize> = (0..n).collect();
    rev[1..].reverse();
    perms.push(rev);
    let mut swap: Vec<usize> = (0..n).collect();
    swap.swap(1, 2);
    perms.push(swap);

    for perm in perms {
        let mut inverse = vec![0usize; n];
        for (new_idx, &old_idx) in perm.iter().enumerate() {
            inverse[old_idx] = new_idx;
        }
        let classes = perm.iter().map(|&old| k.monoid.classes[old].clone()).collect();
        let mut add_table = BTreeMap::new();
        for (&(i, j), entry) in &k.monoid.add_table {
            let (a, b) = (inverse[i], inverse[j]);
            let key = (a.min(b), a.max(b));
            let moved = match entry {
                SumEntry::Class(c) => SumEntry::Class(inverse[*c]),
                other => other.clone(),
            };
            add_table.insert(key, moved);
        }
        let permuted = ClassMonoid {
            base: k.monoid.base.clone(),
            category: k.monoid.category.clone(),
            ambient: k.monoid.ambient.clone(),
            rank_cap: k.monoid.rank_cap,
            classes,
            add_table,
            partial: k.monoid.partial,
        };
        let k2 = grothendieck(permuted).unwrap();
        assert_eq!(k2.free_rank, k.free_rank);
        let mut t1 = k.torsion.clone();
        let mut t2 = k2.torsion.clone();
        t1.sort();
        t2.sort();
        assert_eq!(t1, t2);
        assert_eq!(k2.presentation, k.presentation);
    }
}

#[test]
fn pullback_homomorphisms_compose_contravariantly() {
    let k = circle_group(2);
    let f2 = degree_total(2);
    let f3 = degree_total(3);
    let f6 = compose_cellular(&f2, &f3).unwrap();

    let hom2 = pullback_hom(&f2, &k, &k).unwrap();
    let hom3 = pullback_hom(&f3, &k, &k).unwrap();
    let hom6 = pullback_hom(&f6, &k, &k).unwrap();
    for h in [&hom2, &hom3, &hom6] {
        assert!(h.additive);
        assert!(!h.partial);
    }

    // (f2 . f3)^* = f3^* . f2^*, checked classwise.
    for i in 0..k.monoid.classes.len() {
        let via_f2 = hom2.image_classes[i].expect("total within window");
        let chained = hom3.image_classes[via_f2].expect("total within window");
        assert_eq!(hom6.image_classes[i], Some(chained), "class {i}");
    }

    // The identity map induces the identity homomorphism.
    let total = assemble(&k.monoid.base).unwrap().total;
    let ident = pullback_hom(&CellularMap::identity(&total), &k, &k).unwrap();
    for i in 0..k.monoid.classes.len() {
        assert_eq!(ident.image_classes[i], Some(i));
    }

    // Degree parity: even pullback trivializes the twisted line class, odd
    // keeps it.
    let m = line_class(&k, true);
    let t = line_class(&k, false);
    assert_eq!(hom2.image_classes[m], Some(t));
    assert_eq!(hom3.image_classes[m], Some(m));
    assert_eq!(hom2.image_classes[t], Some(t));
}

#[test]
fn rank_is_an_isomorphism_over_the_point() {
    for max_dim in 1..=2usize {
        let cat = Arc::new(StructureCategory::signed_perm(max_dim));
        let space = StratifiedSpace::base_only(fixtures::point("pt"));
        let k = grothendieck(enumerate_classes(&space, cat, 2).unwrap()).unwrap();
        assert_eq!(k.presentation, "Z", "signed_perm({max_dim})");
        assert!(k.torsion.is_empty());

        let rank_of = |i: usize| -> usize {
            k.monoid.classes[i].layer0.fiber.values().map(|o| o.dim).sum()
        };
        let one = (0..k.monoid.classes.len()).find(|&i| rank_of(i) == 1).unwrap();
        let gen = k.class_map(one).unwrap();
        assert_eq!(gen.free[0].magnitude().to_string(), "1");
        for i in 0..k.monoid.classes.len() {
            let expected = k.scale(&gen, rank_of(i) as i64);
            assert_eq!(k.class_map(i).unwrap(), expected, "class {i} maps to rank");
        }
    }
}

#[test]
fn homotopic_end_maps_induce_the_same_homomorphism() {
    let sp1 = Arc::new(StructureCategory::signed_perm(1));
    for name in ["rotate-trivial", "rotate-split-sign"] {
        let case = fixtures::prism_homotopy_cases()
            .into_iter()
            .find(|c| c.name == name)
            .unwrap();
        let k_src = grothendieck(
            enumerate_classes(&case.dst_space, sp1.clone(), 2).unwrap(),
        )
        .unwrap();
        let k_tgt = grothendieck(
            enumerate_classes(&case.src_space, sp1.clone(), 2).unwrap(),
        )
        .unwrap();
        let base_total = assemble(&case.src_space).unwrap().total;
        let (bottom, top) = homotopy_end_maps(&case.homotopy, &base_total).unwrap();
        let hom_bottom = pullback_hom(&bottom, &k_src, &k_tgt).unwrap();
        let hom_top = pullback_hom(&top, &k_src, &k_tgt).unwrap();
        assert_eq!(
            hom_bottom.image_classes, hom_top.image_classes,
            "{name}: homotopic maps must agree on classes"
        );
        assert_eq!(hom_bottom.images, hom_top.images, "{name}");
    }
}

#[test]
fn the_circle_ring_squares_mobius_to_the_unit() {
    let k = circle_group(2);
    let m = line_class(&k, true);
    let t = line_class(&k, false);
    assert_eq!(unit_class(&k).unwrap(), t);

    let mm = ring_product(&k, &[(m, 1)], &[(m, 1)]).unwrap();
    assert_eq!(mm, k.class_map(t).unwrap());

    // ( [T] + [M] ) . [M] = [M] + [T].
    let lhs = ring_product(&k, &[(t, 1), (m, 1)], &[(m, 1)]).unwrap();
    let rhs = k.combo(&[(m, 1), (t, 1)]).unwrap();
    assert_eq!(lhs, rhs);

    // Unit law on every class.
    let u = unit_class(&k).unwrap();
    for i in 0..k.monoid.classes.len() {
        let prod = ring_product(&k, &[(u, 1)], &[(i, 1)]).unwrap();
        assert_eq!(prod, k.class_map(i).unwrap(), "1 . [{i}]");
    }
}
