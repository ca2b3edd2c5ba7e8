use gazegrammar_core::geometry::{CameraModel, Frame, Point3, RigidTransform};
use gazegrammar_core::scene::{
    load_scene, project_bboxes, randomize_grid_placement, GpBits, GridSpec, ObjectId, ObjectSpec, SceneDocument,
    TriggerGeometry, WorkspaceSpec, GRID_CELLS,
};

fn cube_doc(z: f64) -> SceneDocument {
    SceneDocument {
        objects: vec![ObjectSpec {
            id: "cube".into(),
            label: "cube".into(),
            gp: Some(GpBits::SOLID),
            grid_cell: None,
            position: Some([0.0, 0.0, z]),
            extents: Some([0.06; 3]),
        }],
        grid: GridSpec { origin: [0.0, 0.0, 0.0], pitch_m: 0.13 },
        workspace: WorkspaceSpec { min: [-1.0; 3], max: [1.0; 3] },
    }
}

#[test]
fn on_axis_cube_bbox_is_symmetric() {
    let scene = load_scene(&cube_doc(0.8)).unwrap();
    let cam = CameraModel::default();
    let pose = RigidTransform::identity(Frame::Camera, Frame::World);
    let boxes = project_bboxes(&scene, &pose, &cam, &TriggerGeometry::default()).unwrap();
    assert_eq!(boxes.len(), 1);
    let b = &boxes[0];
    // the near face at z = 0.74 bounds the silhouette
    let half_w = 0.06 / 0.74 * 640.0 / 34.5f64.to_radians().tan();
    let half_h = 0.06 / 0.74 * 360.0 / 21.0f64.to_radians().tan();
    assert!((half_w - 75.50317).abs() < 1e-4);
    assert!((b.right - half_w).abs() < 1e-9 && (b.left + half_w).abs() < 1e-9);
    assert!((b.top - half_h).abs() < 1e-9 && (b.bottom + half_h).abs() < 1e-9);
    assert!((b.depth_m - 0.8).abs() < 1e-12);
    let t = b.trigger_region.unwrap();
    assert_eq!(t.left, b.right);
    assert!((t.width() - (0.25 * 2.0 * half_w).max(40.0)).abs() < 1e-9);
}

#[test]
fn cube_behind_camera_is_not_drawn() {
    let scene = load_scene(&cube_doc(-0.8)).unwrap();
    let pose = RigidTransform::identity(Frame::Camera, Frame::World);
    let boxes = project_bboxes(&scene, &pose, &CameraModel::default(), &TriggerGeometry::default()).unwrap();
    assert!(boxes.is_empty());
}

#[test]
fn default_desk_cells_match_lattice() {
    let scene = load_scene(&SceneDocument::default_desk()).unwrap();
    assert_eq!(scene.objects.len(), 3);
    assert_eq!(scene.occupied_cells(), vec![0, 8]);
    let o = [0.45, 0.12, 0.20];
    for i in 0..GRID_CELLS {
        let c = scene.grid.cell_centre(i).unwrap();
        let want = Point3::world(o[0] + 0.13 * f64::from(i % 3), o[1] + 0.13 * f64::from(i / 3), o[2]);
        assert!(c.distance(&want) < 1e-12, "cell {i}");
    }
}

#[test]
fn randomized_placement_is_uniform_over_distinct_pairs() {
    let base = load_scene(&SceneDocument::default_desk()).unwrap();
    let (cup, bowl) = (ObjectId::new("cup"), ObjectId::new("bowl"));
    let n = 10_000usize;
    let cells = usize::from(GRID_CELLS);
    let mut pairs = vec![0usize; cells * cells];
    let mut drops = vec![0usize; cells];
    for seed in 0..n as u64 {
        let s = randomize_grid_placement(&base, seed).unwrap();
        let c = s.object(&cup).unwrap().grid_cell.unwrap();
        let b = s.object(&bowl).unwrap().grid_cell.unwrap();
        let d = s.drop_target_cell.unwrap();
        assert!(c != b && d != c && d != b, "seed {seed}");
        pairs[usize::from(c) * cells + usize::from(b)] += 1;
        drops[usize::from(d)] += 1;
    }
    let k = (cells * (cells - 1)) as f64;
    let p = 1.0 / k;
    let expect = n as f64 * p;
    let sigma = (n as f64 * p * (1.0 - p)).sqrt();
    let mut chi2 = 0.0;
    for c in 0..cells {
        for b in 0..cells {
            let count = pairs[c * cells + b] as f64;
            if c == b {
                assert_eq!(count, 0.0);
                continue;
            }
            assert!((count - expect).abs() <= 3.0 * sigma, "pair ({c},{b}) seen {count}, expected {expect:.1}±{sigma:.1}");
            chi2 += (count - expect).powi(2) / expect;
        }
    }
    // df = 71, upper 0.1% point
    assert!(chi2 < 112.3, "chi-square {chi2}");
    let dp = 1.0 / cells as f64;
    let ds = (n as f64 * dp * (1.0 - dp)).sqrt();
    for (cell, count) in drops.iter().enumerate() {
        assert!((*count as f64 - n as f64 * dp).abs() <= 4.0 * ds, "drop cell {cell}: {count}");
    }
}

#[test]
fn randomized_placement_is_seed_deterministic() {
    let base = load_scene(&SceneDocument::default_desk()).unwrap();
    for seed in [0, 1, 42, u64::MAX] {
        assert_eq!(randomize_grid_placement(&base, seed).unwrap(), randomize_grid_placement(&base, seed).unwrap());
    }
}
