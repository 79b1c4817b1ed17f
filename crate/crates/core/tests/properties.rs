use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

use molsparse::density::DensityMap;
use molsparse::erbf::{loss, loss_gradient, rotation_matrix, ErbfNeuron, ErbfParams, LossWeights, Sample};
use molsparse::mesh::{mesh_from_model, TriMesh};
use molsparse::metrics::{hausdorff, mesh_area, mesh_volume, SparseStats};
use molsparse::pqr::{parse_pqr, Atom, AtomSet};
use molsparse::trainer::initialize;

fn vec3(range: std::ops::Range<f64>) -> impl Strategy<Value = Vector3<f64>> {
    (range.clone(), range.clone(), range).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

fn angles() -> impl Strategy<Value = Vector3<f64>> {
    vec3(-7.0..7.0)
}

fn atom() -> impl Strategy<Value = Atom> {
    (vec3(-4.0..4.0), 0.8..2.2f64, -1.0..1.0f64).prop_map(|(c, r, q)| Atom::new(c, r, q))
}

fn atoms(max: usize) -> impl Strategy<Value = AtomSet> {
    prop::collection::vec(atom(), 1..max).prop_map(|a| AtomSet::new(a, "prop").unwrap())
}

fn neuron() -> impl Strategy<Value = ErbfNeuron> {
    (0.3..2.0f64, vec3(0.4..1.2), vec3(-1.5..1.5), angles()).prop_map(|(w, d, c, a)| ErbfNeuron {
        w_tilde: w,
        d_tilde: d,
        center: c,
        angles: a,
    })
}

fn samples(max: usize) -> impl Strategy<Value = Vec<Sample>> {
    prop::collection::vec(
        (vec3(-2.5..2.5), 0.0..2.0f64).prop_map(|(point, target)| Sample { point, target }),
        1..max,
    )
}

fn rotate_mesh(mesh: &TriMesh, r: &Matrix3<f64>) -> TriMesh {
    mesh.map_vertices(|v| r * v)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rotation_is_proper_orthogonal(a in angles()) {
        let r = rotation_matrix(&a);
        prop_assert!((r.transpose() * r - Matrix3::identity()).amax() < 1e-12);
        prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn isotropic_neuron_ignores_angles(w in 0.3..2.0f64, d in 0.4..1.2f64, c in vec3(-1.0..1.0),
                                       a in angles(), x in vec3(-3.0..3.0)) {
        let base = ErbfNeuron { w_tilde: w, d_tilde: Vector3::repeat(d), center: c, angles: Vector3::zeros() };
        let turned = ErbfNeuron { angles: a, ..base };
        prop_assert!((base.psi(&x) - turned.psi(&x)).abs() < 1e-12);
    }

    #[test]
    fn psi_is_bounded_and_peaks_at_center(n in neuron(), x in vec3(-3.0..3.0)) {
        let v = n.psi(&x);
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert!((n.psi(&n.center) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn network_output_ignores_neuron_order(ns in prop::collection::vec(neuron(), 1..6), x in vec3(-3.0..3.0)) {
        let p = ErbfParams::new(ns.clone());
        let mut rev = ns;
        rev.reverse();
        let q = ErbfParams::new(rev);
        let (a, b) = (p.forward(&x), q.forward(&x));
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn gradient_matches_central_differences(ns in prop::collection::vec(neuron(), 1..4), batch in samples(30),
                                            rho1 in 0.0..2.0f64, rho2 in 0.1..2.0f64) {
        let params = ErbfParams::new(ns);
        let weights = LossWeights::new(rho1, rho2).unwrap();
        let g = loss_gradient(&params, &batch, &weights).unwrap();
        let flat = params.to_flat();
        let h = 1e-5;
        for (k, &gk) in g.iter().enumerate() {
            let at = |delta: f64| {
                let mut f = flat.clone();
                f[k] += delta;
                loss(&ErbfParams::from_flat(&f).unwrap(), &batch, &weights).unwrap()
            };
            let fd = (at(h) - at(-h)) / (2.0 * h);
            // Mixed tolerance: difference-quotient noise is absolute, so tiny
            // components are compared in absolute terms.
            let tol = 1e-5 * gk.abs().max(fd.abs()) + 1e-8;
            prop_assert!((gk - fd).abs() < tol, "component {k}: {gk} vs {fd}");
        }
    }

    #[test]
    fn density_is_additive(a in atoms(6), b in atoms(6), x in vec3(-6.0..6.0)) {
        let union = AtomSet::new(a.atoms().iter().chain(b.atoms()).copied().collect(), "u").unwrap();
        let phi = |s: &AtomSet| DensityMap::new(s.clone(), 0.5).unwrap().with_cutoff(false).phi(&x);
        let (u, sum) = (phi(&union), phi(&a) + phi(&b));
        prop_assert!((u - sum).abs() <= 1e-12 * u.max(1.0));
    }

    #[test]
    fn density_is_translation_equivariant(a in atoms(6), t in vec3(-20.0..20.0), x in vec3(-6.0..6.0)) {
        let moved = AtomSet::new(
            a.atoms().iter().map(|at| Atom::new(at.center + t, at.radius, at.charge)).collect(),
            "t",
        ).unwrap();
        let p = DensityMap::new(a, 0.5).unwrap().phi(&x);
        let q = DensityMap::new(moved, 0.5).unwrap().phi(&(x + t));
        prop_assert!((p - q).abs() <= 1e-10 * p.max(1.0));
    }

    #[test]
    fn initialization_reproduces_density(a in atoms(8), decay in 0.2..1.0f64, x in vec3(-6.0..6.0)) {
        let p = initialize(&a, decay).unwrap();
        let phi = DensityMap::new(a, decay).unwrap().phi(&x);
        prop_assert!((p.forward(&x) - phi).abs() < 1e-10);
    }

    #[test]
    fn pqr_round_trip_is_exact(a in atoms(20)) {
        let back = parse_pqr(&a.to_pqr(), "prop").unwrap();
        prop_assert_eq!(back.atoms(), a.atoms());
    }

    #[test]
    fn padded_box_contains_every_sphere(a in atoms(20), pad in 0.0..6.0f64) {
        // Slack for the different rounding order of `(c - r) - pad`.
        let b = a.bounding_box(pad).unwrap().padded(1e-12).unwrap();
        for at in a.atoms() {
            let r = Vector3::repeat(at.radius + pad);
            prop_assert!(b.contains(&(at.center + r)) && b.contains(&(at.center - r)));
        }
    }

    #[test]
    fn area_and_volume_survive_rotation(a in angles(), t in vec3(-50.0..50.0)) {
        let r = rotation_matrix(&a);
        for mesh in [TriMesh::unit_cube(), TriMesh::icosphere(Vector3::new(0.3, -0.2, 0.1), 1.5, 2)] {
            let moved = rotate_mesh(&mesh, &r).translated(&t);
            let (a0, a1) = (mesh_area(&mesh), mesh_area(&moved));
            let (v0, v1) = (mesh_volume(&mesh).volume, mesh_volume(&moved).volume);
            prop_assert!((a0 - a1).abs() <= 1e-9 * a0);
            prop_assert!((v0 - v1).abs() <= 1e-9 * v0);
        }
    }

    #[test]
    fn hausdorff_is_symmetric(t in vec3(-0.5..0.5), s in 0.5..2.0f64) {
        let a = TriMesh::icosphere(Vector3::zeros(), 1.0, 2);
        let b = TriMesh::unit_cube().map_vertices(|v| v * s + t);
        let ab = hausdorff(&a, &b, 20.0).unwrap();
        let ba = hausdorff(&b, &a, 20.0).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!(ab >= 0.0);
    }

    #[test]
    fn sparse_ratio_is_in_unit_interval(n in 1usize..1000, k in 1usize..1000) {
        let k = k.min(n);
        let s = SparseStats::new(n, k).unwrap();
        prop_assert!(s.ratio > 0.0 && s.ratio <= 1.0);
    }
}

fn small_molecule() -> AtomSet {
    AtomSet::from_path(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/adp.pqr")).unwrap()
}

#[test]
fn adp_has_39_atoms_and_390_parameters() {
    let atoms = small_molecule();
    assert_eq!(atoms.len(), 39);
    let p = initialize(&atoms, 0.5).unwrap();
    assert_eq!(p.len(), 39);
    assert_eq!(p.param_count(), 390);
}

#[test]
fn initialized_network_meshes_like_the_density_map() {
    let atoms = small_molecule();
    let bbox = atoms.bounding_box(2.0).unwrap();
    let map = DensityMap::new(atoms.clone(), 0.5).unwrap();
    let net = initialize(&atoms, 0.5).unwrap();
    let a = mesh_from_model(&map, &bbox, 0.5, 1.0).unwrap();
    let b = mesh_from_model(&net, &bbox, 0.5, 1.0).unwrap();
    assert!(a.is_closed());
    assert_eq!(a.triangles, b.triangles);
    let worst = a.vertices.iter().zip(&b.vertices).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
    assert!(worst < 1e-9, "{worst}");
}

#[test]
fn volume_shrinks_as_isovalue_rises() {
    let atoms = small_molecule();
    let bbox = atoms.bounding_box(2.0).unwrap();
    let map = DensityMap::new(atoms, 0.5).unwrap();
    let volumes: Vec<f64> = [0.5, 1.0, 2.0, 4.0]
        .iter()
        .map(|&c| {
            let m = mesh_from_model(&map, &bbox, 0.5, c).unwrap();
            let v = mesh_volume(&m);
            assert!(v.closed);
            v.volume
        })
        .collect();
    assert!(volumes.windows(2).all(|w| w[1] < w[0]), "{volumes:?}");
}
