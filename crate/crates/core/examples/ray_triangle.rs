//! Ray/triangle intersection and the single-bounce image construction.

use vbs_beamsim::geom::{mirror_point, ray_triangle_intersect, reflection_point_param, Triangle, Vec3};

fn main() -> vbs_beamsim::Result<()> {
    // A 10 m wall in the plane x = 20, facing -x.
    let wall = Triangle::new(Vec3::new(20.0, -5.0, 0.0), Vec3::new(20.0, 5.0, 10.0), Vec3::new(20.0, 5.0, 0.0))?;
    println!("wall normal {:?}, area {:.1} m²", wall.normal.to_array(), wall.area());

    let origin = Vec3::new(0.0, 0.0, 2.0);
    match ray_triangle_intersect(origin, Vec3::new(1.0, 0.1, 0.0).normalized().unwrap(), &wall) {
        Some(h) => println!("hit at t = {:.3} m, point {:?}", h.t, h.point.to_array()),
        None => println!("miss"),
    }

    let bs = Vec3::new(5.0, -3.0, 4.0);
    let ue = Vec3::new(8.0, 4.0, 1.5);
    let image = mirror_point(bs, wall.v1, wall.normal)?;
    let (bounce, s) = reflection_point_param(image, bs, ue)?;
    println!("BS image {:?}", image.to_array());
    println!("bounce point {:?} at s = {s:.3}", bounce.to_array());
    println!(
        "path length {:.4} m, image distance {:.4} m",
        bs.distance(bounce) + bounce.distance(ue),
        image.distance(ue)
    );
    Ok(())
}
