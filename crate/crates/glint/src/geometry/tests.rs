use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::autodiff::{self, fresh_tape};
use crate::math::{normalize, Vec3};

fn fixed_scene(primitives: Vec<Primitive>) -> (ParameterStore, SceneGeometry) {
    (
        ParameterStore::new(),
        SceneGeometry::Analytic(AnalyticGeometry::fixed(primitives)),
    )
}

fn unit_sphere() -> (ParameterStore, SceneGeometry) {
    fixed_scene(vec![Primitive::Sphere {
        center: [0.0, 0.0, 0.0],
        radius: 1.0,
        param_off: None,
    }])
}

fn random_point(rng: &mut ChaCha8Rng, r: f64) -> Vec3 {
    [
        rng.gen_range(-r..r),
        rng.gen_range(-r..r),
        rng.gen_range(-r..r),
    ]
}

#[test]
fn sphere_distance_examples() {
    let (store, scene) = unit_sphere();
    assert_eq!(scene.sdf(&store, [0.0, 0.0, -3.0]), 2.0);
    assert_eq!(scene.sdf(&store, [0.0, 0.0, 0.0]), -1.0);
}

#[test]
fn plane_distance_example() {
    let (store, scene) = fixed_scene(vec![Primitive::Plane {
        normal: [0.0, 0.0, 1.0],
        offset: 0.0,
    }]);
    // the bounding guard kicks in past radius 3, so stay inside
    assert_eq!(scene.sdf(&store, [1.5, 1.5, -0.25]), -0.25);
}

#[test]
fn union_is_min_of_members() {
    let prims = vec![
        Primitive::Sphere { center: [0.6, 0.0, 0.0], radius: 0.8, param_off: None },
        Primitive::Sphere { center: [-0.6, 0.2, 0.1], radius: 0.5, param_off: None },
        Primitive::Plane { normal: [0.0, 0.0, 1.0], offset: -1.0 },
        Primitive::Box { center: [0.0, -1.0, 1.0], half_extents: [0.4, 0.3, 0.2] },
    ];
    let (store, scene) = fixed_scene(prims.clone());
    let fetch = |_: usize| f64::NAN;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let p = random_point(&mut rng, 2.0);
        let expect = prims
            .iter()
            .map(|prim| sdf_primitive(prim, p, &fetch))
            .fold(f64::INFINITY, f64::min);
        assert_eq!(scene.sdf_unbounded(&store, p), expect);
    }
}

#[test]
fn analytic_lipschitz_bound() {
    let (store, scene) = fixed_scene(vec![
        Primitive::Sphere { center: [0.3, 0.1, -0.2], radius: 0.9, param_off: None },
        Primitive::Box { center: [-0.8, 0.0, 0.5], half_extents: [0.3, 0.5, 0.2] },
        Primitive::Plane { normal: normalize([0.1, 0.2, 1.0]), offset: -0.8 },
    ]);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10_000 {
        let p = random_point(&mut rng, 2.5);
        let q = random_point(&mut rng, 2.5);
        let lhs = (scene.sdf_unbounded(&store, p) - scene.sdf_unbounded(&store, q)).abs();
        assert!(lhs <= math::distance(p, q) + 1e-12);
    }
}

#[test]
fn sphere_and_plane_normals() {
    let (store, sphere) = unit_sphere();
    let n = sphere.normal(&store, [0.0, 0.0, -1.0]).unwrap();
    assert!(math::distance(n, [0.0, 0.0, -1.0]) < 1e-12);

    let (store, plane) = fixed_scene(vec![Primitive::Plane {
        normal: [0.0, 0.0, 1.0],
        offset: 0.0,
    }]);
    for p in [[0.0, 0.0, 0.3], [2.0, -1.0, -0.2], [0.5, 0.5, 0.0]] {
        assert_eq!(plane.normal(&store, p).unwrap(), [0.0, 0.0, 1.0]);
    }
}

#[test]
fn vanishing_gradient_reports_position() {
    let (store, sphere) = unit_sphere();
    let err = sphere.normal(&store, [0.0, 0.0, 0.0]);
    assert!(matches!(err, Err(GeometryError::VanishingGradient { .. })));
}

#[test]
fn normal_rotation_equivariance() {
    // rotate sphere + plane scene by a rigid rotation about z by 2pi/5
    let theta: f64 = 2.0 * std::f64::consts::PI / 5.0;
    let rot = |v: Vec3| -> Vec3 {
        [
            v[0] * theta.cos() - v[1] * theta.sin(),
            v[0] * theta.sin() + v[1] * theta.cos(),
            v[2],
        ]
    };
    let center = [0.4, -0.1, 0.3];
    let pn = normalize([0.2, 0.5, 1.0]);
    let (store, scene) = fixed_scene(vec![
        Primitive::Sphere { center, radius: 0.7, param_off: None },
        Primitive::Plane { normal: pn, offset: -0.9 },
    ]);
    let (store_r, scene_r) = fixed_scene(vec![
        Primitive::Sphere { center: rot(center), radius: 0.7, param_off: None },
        Primitive::Plane { normal: rot(pn), offset: -0.9 },
    ]);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0;
    while checked < 200 {
        let p = random_point(&mut rng, 2.0);
        let n = match scene.normal(&store, p) {
            Ok(n) => n,
            Err(_) => continue,
        };
        let nr = scene_r.normal(&store_r, rot(p)).unwrap();
        assert!(math::distance(nr, rot(n)) <= 1e-9);
        checked += 1;
    }
}

#[test]
fn trainable_sphere_taped_sdf_matches_plain() {
    let mut store = ParameterStore::new();
    let group = store.add_group("geometry", vec![0.1, -0.2, 0.3, 0.8]);
    let scene = SceneGeometry::Analytic(AnalyticGeometry {
        primitives: vec![
            Primitive::Sphere {
                center: [0.0; 3],
                radius: 0.0,
                param_off: Some(0),
            },
            Primitive::Plane { normal: [0.0, 0.0, 1.0], offset: -1.0 },
        ],
        group: Some(group),
    });
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let p = random_point(&mut rng, 2.0);
        let plain = scene.sdf_unbounded(&store, p);
        fresh_tape();
        let pv = [
            autodiff::constant(p[0]),
            autodiff::constant(p[1]),
            autodiff::constant(p[2]),
        ];
        let taped = scene.sdf_var(&store, pv);
        assert_eq!(plain.to_bits(), taped.value().to_bits());
    }

    // gradient w.r.t. center and radius against finite differences
    let report = autodiff::grad_check(
        &mut store,
        |s| {
            let scene = SceneGeometry::Analytic(AnalyticGeometry {
                primitives: vec![Primitive::Sphere {
                    center: [0.0; 3],
                    radius: 0.0,
                    param_off: Some(0),
                }],
                group: s.group_id("geometry"),
            });
            let pv = [
                autodiff::constant(1.2),
                autodiff::constant(-0.4),
                autodiff::constant(0.6),
            ];
            scene.sdf_var(s, pv)
        },
        1e-6,
    )
    .unwrap();
    assert!(report.max_rel_err <= 1e-6, "{report:?}");
}

#[test]
fn bound_guard_outside_scene() {
    let (store, scene) = unit_sphere();
    let d = scene.sdf(&store, [0.0, 0.0, 4.0]);
    assert!((d - 1.1).abs() < 1e-12, "distance-to-bound plus margin, got {d}");
}

#[test]
fn neural_normal_matches_fd_direction() {
    let spec = MlpSpec {
        pe_freqs: 4,
        hidden: vec![32, 32],
        out_dim: 1,
        activation: Activation::Softplus { beta: 100.0 },
    };
    let mut store = ParameterStore::new();
    let net = NeuralSdf::new(&mut store, "sdf", spec, 11);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20 {
        let p = random_point(&mut rng, 1.0);
        let n = match net.normal(&store, p) {
            Ok(n) => n,
            Err(_) => continue,
        };
        // central-difference gradient, h=1e-4
        let h = 1e-4;
        let mut fd = [0.0; 3];
        for i in 0..3 {
            let mut pp = p;
            pp[i] += h;
            let mut pm = p;
            pm[i] -= h;
            fd[i] = (net.value(&store, pp) - net.value(&store, pm)) / (2.0 * h);
        }
        let fd = normalize(fd);
        let angle = math::angle_between(n, fd).to_degrees();
        assert!(angle <= 0.1, "autodiff vs fd normal angle {angle} deg");
    }
}

#[test]
fn sphere_init_rejects_bad_radius() {
    let spec = MlpSpec {
        pe_freqs: 2,
        hidden: vec![8],
        out_dim: 1,
        activation: Activation::Softplus { beta: 100.0 },
    };
    let mut store = ParameterStore::new();
    let net = NeuralSdf::new(&mut store, "sdf", spec, 1);
    let err = sphere_init(&mut store, &net, 0.0, &SdfFitConfig::default());
    assert!(matches!(err, Err(GeometryError::InvalidRadius(_))));
}

#[test]
fn sphere_init_fits_and_yields_usable_surface() {
    let spec = MlpSpec {
        pe_freqs: 6,
        hidden: vec![64, 64, 64, 64],
        out_dim: 1,
        activation: Activation::Softplus { beta: 100.0 },
    };
    let mut store = ParameterStore::new();
    let net = NeuralSdf::new(&mut store, "sdf", spec, 3);
    let cfg = SdfFitConfig::default();
    let residual = sphere_init(&mut store, &net, 1.0, &cfg).expect("fit converged");
    assert!(residual <= 5e-3, "mean residual {residual}");

    // value at the center
    let at_origin = net.value(&store, [0.0; 3]);
    assert!((-1.05..=-0.95).contains(&at_origin), "sdf at origin {at_origin}");

    // normals at surface samples within 3 degrees of radial
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let dir = normalize(random_point(&mut rng, 1.0));
        let n = net.normal(&store, dir).unwrap();
        let angle = math::angle_between(n, dir).to_degrees();
        assert!(angle <= 3.0, "normal deviates {angle} deg from radial");
    }

    // eikonal property near the surface
    let mut ok = 0;
    let total = 10_000;
    let mut scratch = MlpScratch::default();
    for _ in 0..total {
        let dir = normalize(random_point(&mut rng, 1.0));
        let p = math::scale(dir, rng.gen_range(0.9..1.1));
        let g = input_gradient_f64(&net.spec, store.values(net.group), p, &[1.0], &mut scratch);
        let n = math::norm(g);
        if (0.7..=1.3).contains(&n) {
            ok += 1;
        }
    }
    let frac = ok as f64 / total as f64;
    assert!(frac >= 0.95, "eikonal in range for {frac} of near-surface samples");
}
