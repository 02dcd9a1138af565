#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use vshift::oracle::{default_rig, Axis, Primitive, RigCameraSpec, SceneSpec, Texture, Waypoint};
use vshift::rng;
use vshift::{CameraPose, ShiftSpec};

fn color(key: u64, i: u64) -> [u8; 3] {
    let r = rng::mix(key, i);
    [r as u8, (r >> 8) as u8, (r >> 16) as u8]
}

fn texture(key: u64) -> Texture {
    let pair = [color(key, 1), color(key, 2)];
    match rng::mix(key, 0) % 3 {
        0 => Texture::Solid { color: pair[0] },
        1 => Texture::Checker {
            period: 0.2 + rng::uniform(key, 3),
            colors: pair,
        },
        _ => Texture::Noise {
            cell: 0.2 + rng::uniform(key, 3),
            colors: pair,
        },
    }
}

/// A randomized scene of at most 64×64 pixels: a back wall, a ground plane
/// and one to three boxes in front of a 3-camera rig.
pub fn random_scene(seed: u64) -> SceneSpec {
    let u = |i: u64| rng::uniform(seed, i);
    let width = 16 + (u(0) * 49.0) as u32;
    let height = 16 + (u(1) * 49.0) as u32;
    let mut primitives = vec![
        Primitive::Plane {
            axis: Axis::X,
            offset: 8.0 + 22.0 * u(2),
            bounds: None,
            texture: texture(rng::derive(seed, 100)),
        },
        Primitive::Plane {
            axis: Axis::Z,
            offset: -1.0 - u(3),
            bounds: None,
            texture: texture(rng::derive(seed, 101)),
        },
    ];
    let boxes = 1 + (u(4) * 3.0) as u64;
    for b in 0..boxes {
        let k = rng::derive(seed, 200 + b);
        let x = 3.0 + 4.0 * rng::uniform(k, 0);
        let y = -3.0 + 6.0 * rng::uniform(k, 1);
        let z = -1.0 + 1.5 * rng::uniform(k, 2);
        let size = 0.3 + 1.2 * rng::uniform(k, 3);
        primitives.push(Primitive::Box {
            min: [x, y, z],
            max: [x + size, y + size, z + size],
            texture: texture(rng::derive(k, 9)),
        });
    }
    SceneSpec {
        name: format!("random-{seed}"),
        width,
        height,
        focal: Some(f64::from(width) * (0.6 + 0.6 * u(5))),
        rig: default_rig(),
        primitives,
        trajectory: vec![Waypoint {
            position: [0.0, 0.0, 0.0],
            yaw_deg: 10.0 * (u(6) - 0.5),
        }],
        frame_interval: 0.1,
        depth_scale: 0.001,
        seed,
    }
}

/// One forward camera facing a single solid plane `depth` meters ahead.
pub fn plane_scene(width: u32, height: u32, focal: f64, depth: f64) -> SceneSpec {
    SceneSpec {
        name: "plane".into(),
        width,
        height,
        focal: Some(focal),
        rig: vec![RigCameraSpec {
            name: "front".into(),
            yaw_deg: 0.0,
            translation: [0.0; 3],
            gain: 1.0,
        }],
        primitives: vec![Primitive::Plane {
            axis: Axis::X,
            offset: depth,
            bounds: None,
            texture: Texture::Checker {
                period: 0.25,
                colors: [[40, 90, 160], [240, 220, 120]],
            },
        }],
        trajectory: vec![Waypoint {
            position: [0.0; 3],
            yaw_deg: 0.0,
        }],
        frame_interval: 0.1,
        depth_scale: 0.001,
        seed: 0,
    }
}

/// A smooth street-like scene driven forward for `frames` frames.
pub fn street_scene(name: &str, size: u32, frames: usize) -> SceneSpec {
    let noise = |cell, a, b| Texture::Noise { cell, colors: [a, b] };
    SceneSpec {
        name: name.into(),
        width: size,
        height: size,
        focal: None,
        rig: default_rig(),
        primitives: vec![
            Primitive::Plane {
                axis: Axis::X,
                offset: 40.0,
                bounds: None,
                texture: noise(2.0, [30, 80, 140], [230, 190, 90]),
            },
            Primitive::Plane {
                axis: Axis::Z,
                offset: -1.5,
                bounds: None,
                texture: noise(1.0, [60, 60, 60], [140, 130, 110]),
            },
            Primitive::Box {
                min: [14.0, -0.5, -1.5],
                max: [15.5, 1.0, 0.5],
                texture: noise(0.5, [180, 40, 40], [240, 140, 60]),
            },
            Primitive::Box {
                min: [20.0, 3.0, -1.5],
                max: [24.0, 5.0, 2.0],
                texture: noise(0.7, [40, 120, 40], [160, 220, 120]),
            },
        ],
        trajectory: (0..frames)
            .map(|f| Waypoint {
                position: [0.15 * f as f64, 0.02 * (f as f64 * 0.3).sin(), 0.0],
                yaw_deg: 3.0 * (f as f64 * 0.2).sin(),
            })
            .collect(),
        frame_interval: 0.1,
        depth_scale: 0.001,
        seed: 42,
    }
}

/// Pose of the shifted virtual camera in the ego frame.
pub fn virtual_camera(shift: &ShiftSpec, cam2ego: &CameraPose) -> CameraPose {
    shift.as_pose().compose(cam2ego)
}

/// Relative path → bytes for every file under `root`.
pub fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}
