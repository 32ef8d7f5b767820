//! Shared fixtures for the pipeline benchmarks.

use envlight::forward::{
    disk_light_env, gen_test_scene, render_full, Material, RenderOpts, RenderOutput, ScenePreset,
};
use envlight::radiometry::Direction;

/// A rendered 384x384 glossy sphere-on-plane frame, the default estimate
/// workload.
pub fn bench_frame() -> RenderOutput {
    let material = Material {
        rho_d: [0.5, 0.45, 0.4],
        rho_s: 0.3,
        sigma: 0.08,
    };
    let scene = gen_test_scene(ScenePreset::SphereOnPlane, &material, 42).unwrap();
    let env = disk_light_env(
        Direction::new(0.3, -0.2, 0.93).unwrap(),
        0.2,
        [1.5, 1.4, 1.2],
        0.05,
        256,
        128,
    )
    .unwrap();
    render_full(&scene, &env, &RenderOpts::default()).unwrap()
}
