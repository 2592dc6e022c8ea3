//! The default two-listener testbed: array geometry, ear positions and
//! incidence angles. Pass a path to save the scene as TOML.

use psz::config::write_scene;
use psz::geometry::{ear_control_points, incidence_angle, off_axis_angle, Scene};

fn main() -> psz::Result<()> {
    let scene = Scene::testbed();
    let d = scene.room.dimensions;
    println!("room {} x {} x {} m, walls β = {:?}", d.x, d.y, d.z, scene.room.reflectances);
    println!("{} loudspeakers, {} listeners", scene.n_speakers(), scene.n_listeners());
    for s in scene.speakers.iter().step_by(4) {
        println!(
            "  {:<4} {:?} at ({:.3}, {:.2}, {:.2}) a = {} m, band {:?} Hz",
            s.id, s.band, s.position.x, s.position.y, s.position.z, s.piston_radius, s.band_edges
        );
    }

    for (k, listener) in scene.listeners.iter().enumerate() {
        println!("\nlistener {} at {:?}", k + 1, listener.head_center);
        for cp in ear_control_points(listener) {
            let spk = &scene.speakers[0];
            println!(
                "  {} ear {:?}: {} off-axis {:.1}°, incidence {:.1}°",
                cp.ear.label(),
                cp.position,
                spk.id,
                off_axis_angle(spk, cp.position)?.to_degrees(),
                incidence_angle(listener, spk, cp.position)?.to_degrees()
            );
        }
    }

    if let Some(path) = std::env::args().nth(1) {
        write_scene(&scene, std::path::Path::new(&path))?;
        println!("\nwrote {path}");
    }
    Ok(())
}
