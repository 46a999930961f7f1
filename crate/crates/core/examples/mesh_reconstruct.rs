//! Plane segmentation, alpha-shape triangulation and QEM simplification of
//! one scanned building.

use vbs_beamsim::cloud::{scan_faces, ScanParams};
use vbs_beamsim::mesh::{reconstruct_object_mesh, simplify_qem, write_obj, MeshParams};
use vbs_beamsim::oracle::{FaceKind, Scene, SceneBox};

fn main() -> vbs_beamsim::Result<()> {
    let scene = Scene::new(0.0, [0.0, 0.0, 40.0, 40.0], vec![SceneBox::new([10.0, 12.0, 0.0], [28.0, 26.0, 12.0], 10.0)]);
    let walls: Vec<_> = scene.faces().into_iter().filter(|f| f.kind != FaceKind::Ground).collect();
    let true_area: f64 = walls.iter().map(|f| f.area()).sum();
    let cloud = scan_faces(&walls, None, &ScanParams { density: 10.0, noise_sigma: 0.02, drop_rate: 0.05 }, 3)?;

    let params = MeshParams::default();
    let mesh = reconstruct_object_mesh(&cloud.points, &params);
    let simple = simplify_qem(&mesh, params.target_faces);
    println!("{} points -> {} faces -> {} faces", cloud.len(), mesh.len(), simple.len());
    println!("surface area: true {true_area:.1}, mesh {:.1}, simplified {:.1} m²", mesh.area(), simple.area());

    let path = std::env::temp_dir().join("vbs_beamsim_building.obj");
    write_obj(&simple, &path)?;
    println!("wrote {}", path.display());
    Ok(())
}
