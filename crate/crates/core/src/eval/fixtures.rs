//! Synthetic closed models with analytic outward normals.

use std::f64::consts::PI;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::transform::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fixture {
    Sphere,
    SphereUnion,
    CubeWithBumps,
}

impl Fixture {
    pub const ALL: [Fixture; 3] = [Fixture::Sphere, Fixture::SphereUnion, Fixture::CubeWithBumps];

    pub fn name(self) -> &'static str {
        match self {
            Fixture::Sphere => "sphere",
            Fixture::SphereUnion => "sphere-union",
            Fixture::CubeWithBumps => "cube-bumps",
        }
    }

    pub fn from_name(name: &str) -> Option<Fixture> {
        Fixture::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn build(self, points: usize, seed: u64) -> Result<PointCloud> {
        match self {
            Fixture::Sphere => sphere(points, 20.0, seed),
            Fixture::SphereUnion => sphere_union(points, seed),
            Fixture::CubeWithBumps => cube_with_bumps(points, seed),
        }
    }
}

fn unit_direction(rng: &mut ChaCha8Rng) -> Vec3 {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random_range(0.0..2.0 * PI);
    let s = (1.0 - z * z).max(0.0).sqrt();
    Vec3::new(s * phi.cos(), s * phi.sin(), z)
}

fn finish(points: Vec<Vec3>, normals: Vec<Vec3>) -> Result<PointCloud> {
    PointCloud::new(points).with_normals(normals)
}

/// Uniform samples on a sphere centered at the origin.
pub fn sphere(n: usize, radius: f64, seed: u64) -> Result<PointCloud> {
    if n == 0 || radius <= 0.0 {
        return Err(Error::invalid("sphere needs points and a positive radius"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normals: Vec<Vec3> = (0..n).map(|_| unit_direction(&mut rng)).collect();
    finish(normals.iter().map(|d| d * radius).collect(), normals)
}

const UNION_SPHERES: [([f64; 3], f64); 5] = [
    ([0.0, 0.0, 0.0], 20.0),
    ([17.0, 8.0, 4.0], 11.0),
    ([-12.0, 13.0, -6.0], 9.0),
    ([4.0, -15.0, 12.0], 10.0),
    ([-10.0, -9.0, -14.0], 8.0),
];

/// Uniform samples on the boundary of a union of five overlapping spheres.
pub fn sphere_union(n: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::invalid("sphere union needs points"));
    }
    let spheres: Vec<(Vec3, f64)> = UNION_SPHERES
        .iter()
        .map(|&(c, r)| (Vec3::from(c), r))
        .collect();
    let total_area: f64 = spheres.iter().map(|(_, r)| r * r).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    while points.len() < n {
        let mut pick = rng.random_range(0.0..total_area);
        let mut s = 0;
        while s + 1 < spheres.len() && pick >= spheres[s].1 * spheres[s].1 {
            pick -= spheres[s].1 * spheres[s].1;
            s += 1;
        }
        let (c, r) = spheres[s];
        let d = unit_direction(&mut rng);
        let p = c + d * r;
        let buried = spheres
            .iter()
            .enumerate()
            .any(|(o, (co, ro))| o != s && (p - co).norm() < *ro);
        if !buried {
            points.push(p);
            normals.push(d);
        }
    }
    finish(points, normals)
}

struct Bump {
    face: usize,
    u: f64,
    v: f64,
    amplitude: f64,
    sigma: f64,
}

const CUBE_HALF: f64 = 20.0;

const BUMPS: [Bump; 9] = [
    Bump { face: 0, u: 5.0, v: -4.0, amplitude: 4.0, sigma: 3.0 },
    Bump { face: 0, u: -8.0, v: 9.0, amplitude: -3.0, sigma: 2.5 },
    Bump { face: 1, u: 3.0, v: 8.0, amplitude: 4.0, sigma: 3.5 },
    Bump { face: 2, u: 0.0, v: 0.0, amplitude: 5.0, sigma: 4.0 },
    Bump { face: 3, u: -5.0, v: -6.0, amplitude: 3.0, sigma: 2.0 },
    Bump { face: 4, u: -9.0, v: 5.0, amplitude: 3.5, sigma: 3.0 },
    Bump { face: 5, u: 7.0, v: 7.0, amplitude: 3.0, sigma: 2.5 },
    Bump { face: 5, u: -6.0, v: -3.0, amplitude: 4.0, sigma: 3.0 },
    Bump { face: 3, u: 9.0, v: 2.0, amplitude: -2.5, sigma: 2.5 },
];

/// Face `f`: outward normal and two in-plane axes (`+x, −x, +y, −y, +z, −z`).
fn face_frame(f: usize) -> (Vec3, Vec3, Vec3) {
    let sign = if f.is_multiple_of(2) { 1.0 } else { -1.0 };
    match f / 2 {
        0 => (Vec3::x() * sign, Vec3::y(), Vec3::z()),
        1 => (Vec3::y() * sign, Vec3::z(), Vec3::x()),
        _ => (Vec3::z() * sign, Vec3::x(), Vec3::y()),
    }
}

/// A cube of side 40 with Gaussian bumps and dents on its faces.
pub fn cube_with_bumps(n: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::invalid("cube needs points"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for _ in 0..n {
        let face = rng.random_range(0..6usize);
        let u: f64 = rng.random_range(-CUBE_HALF..CUBE_HALF);
        let v: f64 = rng.random_range(-CUBE_HALF..CUBE_HALF);
        let (mut h, mut hu, mut hv) = (0.0, 0.0, 0.0);
        for b in BUMPS.iter().filter(|b| b.face == face) {
            let (du, dv) = (u - b.u, v - b.v);
            let g = b.amplitude * (-(du * du + dv * dv) / (2.0 * b.sigma * b.sigma)).exp();
            h += g;
            hu -= g * du / (b.sigma * b.sigma);
            hv -= g * dv / (b.sigma * b.sigma);
        }
        let (nf, e1, e2) = face_frame(face);
        points.push(nf * (CUBE_HALF + h) + e1 * u + e2 * v);
        normals.push((nf - e1 * hu - e2 * hv).normalize());
    }
    finish(points, normals)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_deterministic_and_sized() {
        for f in Fixture::ALL {
            let a = f.build(500, 4).unwrap();
            assert_eq!(a.len(), 500);
            assert_eq!(a, f.build(500, 4).unwrap());
            assert_eq!(Fixture::from_name(f.name()), Some(f));
        }
    }

    #[test]
    fn union_points_lie_on_the_boundary() {
        let c = sphere_union(2000, 1).unwrap();
        for p in c.points() {
            let on_some = UNION_SPHERES
                .iter()
                .any(|&(ctr, r)| ((p - Vec3::from(ctr)).norm() - r).abs() < 1e-9);
            let inside_any = UNION_SPHERES
                .iter()
                .any(|&(ctr, r)| (p - Vec3::from(ctr)).norm() < r - 1e-9);
            assert!(on_some && !inside_any);
        }
    }
}
