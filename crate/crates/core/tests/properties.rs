use std::f64::consts::PI;

use nalgebra::{Point2, Vector3};
use proptest::prelude::*;
use ricciface::align::{apply_transform, RigidTransform};
use ricciface::channels::{decode_mci, encode_mci, ChannelImage};
use ricciface::embed::{layout, orthographic, similarity_residual, PlanarEmbedding, Projection};
use ricciface::fixtures;
use ricciface::geom::{angle_deficit_curvature, weighted_curvature};
use ricciface::mesh::{mesh_from_depth, read_obj, read_ply, write_obj, write_ply, DepthGrid, TriMesh};
use ricciface::ricci::{init_circle_packing, metric_curvature, ricci_flow, FlowMode, FlowOptions};

fn transform_strategy(max_angle: f64) -> impl Strategy<Value = RigidTransform> {
    (
        (-1.0..1.0f64, -1.0..1.0f64, 0.1..1.0f64),
        -max_angle..max_angle,
        (-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64),
    )
        .prop_map(|((ax, ay, az), angle, (tx, ty, tz))| {
            RigidTransform::from_axis_angle(Vector3::new(ax, ay, az), angle, Vector3::new(tx, ty, tz))
        })
}

/// Random height field on a small grid.
fn height_field() -> impl Strategy<Value = TriMesh> {
    (3usize..8, 3usize..8)
        .prop_flat_map(|(w, h)| (Just(w), Just(h), prop::collection::vec(-0.4..0.4f64, w * h)))
        .prop_map(|(w, h, z)| {
            let depths = z.into_iter().map(Some).collect();
            mesh_from_depth(&DepthGrid::new(w, h, 1.0, depths, None).unwrap()).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rigid_motion_preserves_distances_and_curvature(t in transform_strategy(PI)) {
        let mesh = fixtures::synthetic_face(12, 14, 2.0);
        let moved = apply_transform(&mesh, &t);
        for (a, b) in mesh.edge_lengths().iter().zip(moved.edge_lengths()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        let v = mesh.vertices();
        let w = moved.vertices();
        for i in (0..v.len()).step_by(17) {
            for j in (0..v.len()).step_by(23) {
                prop_assert!(((v[i] - v[j]).norm() - (w[i] - w[j]).norm()).abs() < 1e-9);
            }
        }
        let k0 = angle_deficit_curvature(&mesh).unwrap().values;
        let k1 = angle_deficit_curvature(&moved).unwrap().values;
        for (a, b) in k0.iter().zip(&k1) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        let w0 = weighted_curvature(&mesh).unwrap().values;
        let w1 = weighted_curvature(&moved).unwrap().values;
        for (a, b) in w0.iter().zip(&w1) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        prop_assert_eq!(moved.faces(), mesh.faces());
        prop_assert_eq!(moved.colors(), mesh.colors());
    }

    #[test]
    fn transform_then_inverse_is_identity(t in transform_strategy(PI)) {
        let mesh = fixtures::spherical_cap(4, 1.0);
        let back = apply_transform(&apply_transform(&mesh, &t), &t.inverse());
        for (a, b) in back.vertices().iter().zip(mesh.vertices()) {
            prop_assert!((a - b).norm() < 1e-9);
        }
        prop_assert!(t.is_valid(1e-9));
    }

    #[test]
    fn gauss_bonnet_on_height_fields(mesh in height_field()) {
        let total: f64 = angle_deficit_curvature(&mesh).unwrap().values.iter().sum();
        prop_assert!((total - 2.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn flow_then_layout_on_height_fields(mesh in height_field()) {
        let cp = init_circle_packing(&mesh).unwrap();
        let (flat, report) = ricci_flow(&mesh, &cp, &FlowOptions::new(FlowMode::Newton)).unwrap();
        prop_assert!(report.converged);
        prop_assert!(report.energy_history.windows(2).all(|w| w[1] <= w[0]));
        let k = metric_curvature(&mesh, &flat).unwrap();
        let boundary: f64 = mesh.boundary_loop().iter().map(|&v| k[v]).sum();
        prop_assert!((boundary - 2.0 * PI).abs() < 1e-5);
        for &v in mesh.boundary_loop() {
            prop_assert_eq!(flat.log_radii()[v].to_bits(), cp.log_radii()[v].to_bits());
        }
        let emb = layout(&mesh, &flat, 1e-6).unwrap();
        prop_assert_eq!(emb.flipped_faces(&mesh), 0);
        prop_assert!(emb.max_edge_residual().unwrap() < 1e-4);
    }

    #[test]
    fn mesh_files_round_trip(mesh in height_field()) {
        let obj = read_obj(&write_obj(&mesh)).unwrap();
        let ply = read_ply(&write_ply(&mesh)).unwrap();
        for back in [obj, ply] {
            prop_assert_eq!(back.faces(), mesh.faces());
            for (a, b) in back.vertices().iter().zip(mesh.vertices()) {
                prop_assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn mci_round_trips(
        (w, h, seed) in (2usize..12, 2usize..12, any::<u64>())
    ) {
        let plane = w * h;
        let mut x = seed | 1;
        let mut next = || {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            x
        };
        let mask: Vec<bool> = (0..plane).map(|_| next() % 3 != 0).collect();
        let data: Vec<f32> = (0..9 * plane)
            .map(|i| if mask[i % plane] { (next() % 25500) as f32 / 100.0 } else { 0.0 })
            .collect();
        let norm: Vec<(f32, f32)> = (0..9).map(|c| (-(c as f32), c as f32 * 1.5)).collect();
        let img = ChannelImage::new(w, h, data, mask, norm).unwrap();
        let bytes = encode_mci(&img);
        let back = decode_mci(&bytes).unwrap();
        prop_assert_eq!(&back, &img);
        prop_assert_eq!(encode_mci(&back), bytes);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn conformal_layout_is_pose_insensitive(t in transform_strategy(PI)) {
        let mesh = fixtures::synthetic_face(16, 18, 2.0);
        let moved = apply_transform(&mesh, &t);
        let flat = |m: &TriMesh| {
            let cp = init_circle_packing(m).unwrap();
            let (metric, _) = ricci_flow(m, &cp, &FlowOptions::default()).unwrap();
            layout(m, &metric, 1e-6).unwrap()
        };
        prop_assert!(similarity_residual(flat(&mesh).uv(), flat(&moved).uv()) < 1e-6);
    }

    #[test]
    fn icp_recovers_moderate_motions(t in transform_strategy(20f64.to_radians())) {
        let reference = fixtures::synthetic_face(31, 37, 3.0);
        let source = apply_transform(&reference, &t);
        let fit = ricciface::align::icp_align(&source, &reference, 400, 1e-12).unwrap();
        let residual = fit.transform.compose(&t);
        prop_assert!(residual.rotation_angle().to_degrees() < 0.1, "{:?}", fit.rms);
        prop_assert!(residual.translation.norm() < 1e-3);
        prop_assert!(fit.rms_history.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn similarity_residual_detects_shear() {
    let a: Vec<Point2<f64>> = (0..20).map(|i| Point2::new(i as f64, (i * i % 7) as f64)).collect();
    let rotated: Vec<Point2<f64>> = a
        .iter()
        .map(|p| {
            let (s, c) = 0.7f64.sin_cos();
            Point2::new(3.0 * (c * p.x - s * p.y) + 1.0, 3.0 * (s * p.x + c * p.y) - 2.0)
        })
        .collect();
    assert!(similarity_residual(&a, &rotated) < 1e-12);
    let sheared: Vec<Point2<f64>> = a.iter().map(|p| Point2::new(p.x + 0.5 * p.y, p.y)).collect();
    assert!(similarity_residual(&a, &sheared) > 1e-2);
}

#[test]
fn orthographic_is_not_pose_insensitive() {
    let mesh = fixtures::synthetic_face(16, 18, 2.0);
    let t = RigidTransform::from_axis_angle(Vector3::new(1.0, 0.4, 0.0), 30f64.to_radians(), Vector3::zeros());
    let moved = apply_transform(&mesh, &t);
    assert!(similarity_residual(orthographic(&mesh).uv(), orthographic(&moved).uv()) > 1e-2);
}

#[test]
fn profile_view_collapses_under_orthographic_projection() {
    let face = fixtures::profile(&fixtures::synthetic_face(21, 25, 3.0));
    let d = ricciface::geom::qc_distortion(&face, &orthographic(&face)).unwrap();
    assert!(d.flipped > 0);
    let emb: PlanarEmbedding = orthographic(&face);
    assert_eq!(emb.projection(), Projection::Orthographic);
}
