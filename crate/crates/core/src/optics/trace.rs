use crate::error::{Error, Result};
use crate::optics::prescription::{SurfaceKind, TraceModel, TraceSurface};
use crate::optics::vec3::Vec3;

/// Minimum parametric distance for a forward intersection; rejects
/// re-intersections with the surface a ray just left.
const T_MIN: f64 = 1e-9;

/// Newton tolerance (mm) and iteration cap for asphere intersection.
const ASPHERE_TOL_MM: f64 = 1e-10;
const ASPHERE_MAX_ITER: usize = 50;

/// A geometric ray in object/lens space.
#[derive(Copy, Clone, Debug)]
pub struct Ray {
    pub origin: Vec3,
    /// Unit direction (|direction| = 1 within 1e-12).
    pub direction: Vec3,
    pub wavelength_nm: f64,
    pub alive: bool,
}

impl Ray {
    pub fn new(origin: Vec3, direction: Vec3, wavelength_nm: f64) -> Self {
        Ray { origin, direction: direction.normalized(), wavelength_nm, alive: true }
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

/// Why a ray died during the trace.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum DeadReason {
    /// No forward intersection with the surface.
    Miss,
    /// Blocked by a semi-diameter (including the stop).
    Clipped,
    /// Total internal reflection.
    Tir,
}

/// Dead-ray report: which surface killed the ray and why. The sensor is
/// reported as `surface_index == surfaces.len()`.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct DeadRay {
    pub surface_index: usize,
    pub reason: DeadReason,
}

/// Survivor landing on the sensor.
#[derive(Copy, Clone, Debug)]
pub struct SensorHit {
    /// Intersection point with the sensor surface (mm).
    pub position: Vec3,
    pub direction: Vec3,
}

/// Vector Snell refraction.
///
/// `incident` and `normal` must be unit length; the normal's orientation is
/// immaterial (it is flipped to face the incident ray). Returns the unit
/// transmitted direction, or `Err` under total internal reflection.
pub fn refract(incident: Vec3, normal: Vec3, n1: f64, n2: f64) -> std::result::Result<Vec3, ()> {
    let mut n = normal;
    let mut cos_i = -incident.dot(n);
    if cos_i < 0.0 {
        n = -n;
        cos_i = -cos_i;
    }
    let eta = n1 / n2;
    let sin2_t = eta * eta * (1.0 - cos_i * cos_i);
    if sin2_t > 1.0 {
        return Err(());
    }
    let cos_t = (1.0 - sin2_t).sqrt();
    let t = incident * eta + n * (eta * cos_i - cos_t);
    Ok(t.normalized())
}

/// Intersection of a ray with a sphere of the given signed radius whose
/// vertex sits on the axis at `z_vertex`. Picks the cap containing the
/// vertex. Returns the parametric distance.
fn intersect_sphere(ray: &Ray, z_vertex: f64, radius: f64) -> Option<f64> {
    let center = Vec3::new(0.0, 0.0, z_vertex + radius);
    let oc = ray.origin - center;
    let b = 2.0 * ray.direction.dot(oc);
    let c = oc.dot(oc) - radius * radius;
    let disc = b * b - 4.0 * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let mut best: Option<f64> = None;
    for t in [(-b - sq) / 2.0, (-b + sq) / 2.0] {
        if t <= T_MIN {
            continue;
        }
        let z_hit = ray.origin.z + ray.direction.z * t;
        // The vertex-side cap satisfies (z - z_center) * radius < 0.
        if (z_hit - center.z) * radius < 0.0 {
            best = Some(match best {
                Some(prev) => prev.min(t),
                None => t,
            });
        }
    }
    best
}

/// Intersection with the plane z = z_vertex.
fn intersect_plane(ray: &Ray, z_vertex: f64) -> Option<f64> {
    if ray.direction.z.abs() < 1e-300 {
        return None;
    }
    let t = (z_vertex - ray.origin.z) / ray.direction.z;
    (t > T_MIN).then_some(t)
}

/// Intersection with a general surface (plane, sphere, or even asphere).
/// Aspheres refine the base intersection by damped Newton iteration on
/// f(t) = z(t) - z_vertex - sag(r(t)).
fn intersect_surface(ray: &Ray, surface: &TraceSurface) -> Option<f64> {
    let base = match surface.radius {
        Some(r) => intersect_sphere(ray, surface.z_vertex, r),
        None => intersect_plane(ray, surface.z_vertex),
    }?;
    if surface.asphere == [0.0; 4] {
        return Some(base);
    }
    let mut t = base;
    let mut f_prev = f64::INFINITY;
    for _ in 0..ASPHERE_MAX_ITER {
        let p = ray.at(t);
        let r = p.hypot_xy();
        let f = p.z - surface.z_vertex - surface.sag(r);
        if f.abs() < ASPHERE_TOL_MM {
            return (t > T_MIN).then_some(t);
        }
        let dr_dt = if r > 1e-12 {
            (p.x * ray.direction.x + p.y * ray.direction.y) / r
        } else {
            0.0
        };
        let df_dt = ray.direction.z - surface.sag_derivative(r) * dr_dt;
        if df_dt.abs() < 1e-300 {
            return None;
        }
        let mut step = -f / df_dt;
        // Damp steps that would overshoot into a larger residual.
        if f.abs() > f_prev {
            step *= 0.5;
        }
        f_prev = f.abs();
        t += step;
    }
    None
}

/// Outward gradient of the surface function; points roughly along -z for a
/// convex-toward-object surface. The tracer never relies on its sign.
fn surface_normal(surface: &TraceSurface, point: Vec3) -> Vec3 {
    if surface.is_planar() {
        return Vec3::new(0.0, 0.0, 1.0);
    }
    if surface.asphere == [0.0; 4] {
        let radius = surface.radius.expect("non-planar");
        let center = Vec3::new(0.0, 0.0, surface.z_vertex + radius);
        return ((point - center) * (1.0 / radius)).normalized();
    }
    let r = point.hypot_xy();
    let dz = surface.sag_derivative(r);
    if r < 1e-12 {
        return Vec3::new(0.0, 0.0, 1.0);
    }
    Vec3::new(-dz * point.x / r, -dz * point.y / r, 1.0).normalized()
}

/// Propagates a ray surface-by-surface to the sensor.
///
/// Each surface applies intersection, semi-diameter clipping, and (except at
/// the stop) refraction; the final step intersects the sensor sphere or
/// plane. Sensor hits are not clipped by the sensor semi-diameter: PSF
/// binning decides what is captured.
pub fn trace_ray(model: &TraceModel, ray: Ray) -> std::result::Result<SensorHit, DeadRay> {
    let mut ray = ray;
    for (i, surface) in model.surfaces.iter().enumerate() {
        let t = intersect_surface(&ray, surface)
            .ok_or(DeadRay { surface_index: i, reason: DeadReason::Miss })?;
        let hit = ray.at(t);
        if hit.hypot_xy() > surface.semi_diameter {
            return Err(DeadRay { surface_index: i, reason: DeadReason::Clipped });
        }
        if surface.kind != SurfaceKind::Stop && surface.n_before != surface.n_after {
            let normal = surface_normal(surface, hit);
            let refracted = refract(ray.direction, normal, surface.n_before, surface.n_after)
                .map_err(|_| DeadRay { surface_index: i, reason: DeadReason::Tir })?;
            ray.direction = refracted;
        }
        ray.origin = hit;
    }
    let sensor_index = model.surfaces.len();
    let t = match model.sensor_radius {
        Some(r) => intersect_sphere(&ray, model.sensor_z, r),
        None => intersect_plane(&ray, model.sensor_z),
    }
    .ok_or(DeadRay { surface_index: sensor_index, reason: DeadReason::Miss })?;
    Ok(SensorHit { position: ray.at(t), direction: ray.direction })
}

/// Traces a ray and reports where it crosses the stop plane, for chief-ray
/// aiming. Dies the same way `trace_ray` does on the surfaces before the
/// stop.
fn stop_plane_crossing(model: &TraceModel, ray: Ray) -> std::result::Result<(f64, f64), DeadRay> {
    let mut ray = ray;
    for (i, surface) in model.surfaces.iter().enumerate() {
        if i == model.stop_index {
            let t = intersect_plane(&ray, surface.z_vertex)
                .ok_or(DeadRay { surface_index: i, reason: DeadReason::Miss })?;
            let hit = ray.at(t);
            return Ok((hit.x, hit.y));
        }
        let t = intersect_surface(&ray, surface)
            .ok_or(DeadRay { surface_index: i, reason: DeadReason::Miss })?;
        let hit = ray.at(t);
        // Aiming ignores clipping: the solved chief ray passes the stop
        // center by construction, and intermediate iterates may wander.
        if surface.kind != SurfaceKind::Stop && surface.n_before != surface.n_after {
            let normal = surface_normal(surface, hit);
            let refracted = refract(ray.direction, normal, surface.n_before, surface.n_after)
                .map_err(|_| DeadRay { surface_index: i, reason: DeadReason::Tir })?;
            ray.direction = refracted;
        }
        ray.origin = hit;
    }
    unreachable!("stop index is within the surface list");
}

/// Finds the chief ray from an object point in the meridional (x-z) plane and
/// returns its sensor landing point.
///
/// The chief ray is defined as the ray through the stop center; the aim point
/// on the first-vertex plane is solved by secant iteration on the stop-plane
/// crossing height.
pub fn chief_ray_landing(model: &TraceModel, object: Vec3) -> Result<Vec3> {
    debug_assert!(object.y.abs() < 1e-12, "object must lie in the x-z plane");
    let trace_aim = |aim_x: f64| -> Result<f64> {
        let dir = (Vec3::new(aim_x, 0.0, 0.0) - object).normalized();
        let ray = Ray::new(object, dir, model.wavelength_nm);
        match stop_plane_crossing(model, ray) {
            Ok((x, _)) => Ok(x),
            Err(_) => Err(Error::DeadBundle),
        }
    };

    // Secant iteration on the stop-crossing height as a function of aim x.
    let mut x0 = 0.0;
    let mut h0 = trace_aim(x0)?;
    if h0.abs() < 1e-11 {
        return finish_chief(model, object, x0);
    }
    let mut x1 = 0.1;
    let mut h1 = trace_aim(x1)?;
    for _ in 0..64 {
        let denom = h1 - h0;
        if denom.abs() < 1e-300 {
            break;
        }
        let x2 = x1 - h1 * (x1 - x0) / denom;
        let h2 = trace_aim(x2)?;
        x0 = x1;
        h0 = h1;
        x1 = x2;
        h1 = h2;
        if h1.abs() < 1e-11 {
            return finish_chief(model, object, x1);
        }
    }
    Err(Error::DeadBundle)
}

fn finish_chief(model: &TraceModel, object: Vec3, aim_x: f64) -> Result<Vec3> {
    let dir = (Vec3::new(aim_x, 0.0, 0.0) - object).normalized();
    let ray = Ray::new(object, dir, model.wavelength_nm);
    match trace_ray(model, ray) {
        Ok(hit) => Ok(hit.position),
        Err(_) => Err(Error::DeadBundle),
    }
}
