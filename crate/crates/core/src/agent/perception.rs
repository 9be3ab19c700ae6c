//! Simulated computer vision: footprint geometry plus seeded score noise.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bus::Millis;
use crate::geo::{GeoPoint, Local, Projection};

/// Half of the camera's field of view, in degrees.
pub const DEFAULT_HALF_FOV_DEG: f64 = 30.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub object_class: String,
    pub confidence: f64,
    pub reliability: f64,
    pub location: GeoPoint,
    pub frame: u64,
    pub uav: String,
}

impl DetectionEvent {
    pub fn is_valid(&self) -> bool {
        (0.0..=1.0).contains(&self.confidence) && (0.0..=1.0).contains(&self.reliability)
    }
}

/// Uniform draw in `[mean − spread, mean + spread]`, clamped to `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreDist {
    pub mean: f64,
    pub spread: f64,
}

impl ScoreDist {
    pub fn floor(&self) -> f64 {
        (self.mean - self.spread).clamp(0.0, 1.0)
    }

    pub fn ceiling(&self) -> f64 {
        (self.mean + self.spread).clamp(0.0, 1.0)
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        (self.mean - self.spread + 2.0 * self.spread * u).clamp(0.0, 1.0)
    }

    fn shifted(self, delta: f64) -> ScoreDist {
        ScoreDist {
            mean: self.mean + delta,
            ..self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseProfile {
    pub confidence: ScoreDist,
    pub reliability: ScoreDist,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weather {
    Clear,
    Misty,
}

/// Per-scenario noise: the profile for real victims, the one for look-alikes,
/// and how much mist lowers mean reliability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub victim: NoiseProfile,
    pub decoy: NoiseProfile,
    pub mist_reliability_penalty: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            victim: NoiseProfile {
                confidence: ScoreDist {
                    mean: 0.9,
                    spread: 0.05,
                },
                reliability: ScoreDist {
                    mean: 0.9,
                    spread: 0.05,
                },
            },
            decoy: NoiseProfile {
                confidence: ScoreDist {
                    mean: 0.6,
                    spread: 0.3,
                },
                reliability: ScoreDist {
                    mean: 0.5,
                    spread: 0.2,
                },
            },
            mist_reliability_penalty: 0.35,
        }
    }
}

impl NoiseModel {
    pub fn profile(&self, kind: ObjectKind, weather: Weather) -> NoiseProfile {
        let base = match kind {
            ObjectKind::Victim => self.victim,
            ObjectKind::Decoy => self.decoy,
        };
        match weather {
            Weather::Clear => base,
            Weather::Misty => NoiseProfile {
                reliability: base.reliability.shifted(-self.mist_reliability_penalty),
                ..base
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    Victim,
    Decoy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub kind: ObjectKind,
    pub location: GeoPoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeatherChange {
    pub at_ms: Millis,
    pub weather: Weather,
}

/// A sensor hazard that makes one UAV's autonomy descend periodically
/// (water reflections near the river surface).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReflectionHazard {
    pub uav: String,
    pub from_ms: Millis,
    pub until_ms: Millis,
    pub period_ms: Millis,
    pub descent_m: f64,
}

/// Ground truth for the harness. UAVs only see it through `detect`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scene {
    pub objects: Vec<SceneObject>,
    pub weather: Vec<WeatherChange>,
    pub hazards: Vec<ReflectionHazard>,
    pub noise: NoiseModel,
}

impl Scene {
    pub fn weather_at(&self, now: Millis) -> Weather {
        self.weather
            .iter()
            .filter(|w| w.at_ms <= now)
            .max_by_key(|w| w.at_ms)
            .map_or(Weather::Clear, |w| w.weather)
    }

    /// Index of the nearest object to `p` within `radius` meters.
    pub fn nearest(&self, proj: &Projection, p: Local, radius: f64) -> Option<usize> {
        self.objects
            .iter()
            .enumerate()
            .map(|(i, o)| (i, proj.to_local(o.location).distance(p)))
            .filter(|&(_, d)| d <= radius)
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .map(|(i, _)| i)
    }
}

pub fn footprint_radius(altitude_m: f64, half_fov_deg: f64) -> f64 {
    altitude_m.max(0.0) * half_fov_deg.to_radians().tan()
}

/// Camera state a single detection pass needs.
pub struct CameraView<'a> {
    pub uav: &'a str,
    pub position: Local,
    pub altitude_m: f64,
    pub half_fov_deg: f64,
    pub frame: u64,
    pub now: Millis,
    /// Locations to ignore (already resolved sightings) and their radius.
    pub ignore: &'a [Local],
    pub ignore_radius: f64,
}

/// Looks for the nearest object under the footprint. Scores are drawn only when
/// something is seen, so RNG consumption depends on geometry alone.
pub fn detect<R: Rng>(
    scene: &Scene,
    proj: &Projection,
    view: &CameraView<'_>,
    rng: &mut R,
) -> Option<(usize, DetectionEvent)> {
    let radius = footprint_radius(view.altitude_m, view.half_fov_deg);
    let idx = scene
        .objects
        .iter()
        .enumerate()
        .filter(|(_, o)| {
            let l = proj.to_local(o.location);
            !view
                .ignore
                .iter()
                .any(|x| x.distance(l) <= view.ignore_radius)
        })
        .map(|(i, o)| (i, proj.to_local(o.location).distance(view.position)))
        .filter(|&(_, d)| d <= radius)
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)?;
    let obj = &scene.objects[idx];
    let profile = scene.noise.profile(obj.kind, scene.weather_at(view.now));
    let confidence = profile.confidence.draw(rng);
    let reliability = profile.reliability.draw(rng);
    Some((
        idx,
        DetectionEvent {
            object_class: "person".into(),
            confidence,
            reliability,
            location: obj.location,
            frame: view.frame,
            uav: view.uav.to_string(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (Scene, Projection) {
        let origin = GeoPoint::new(41.7, -86.24);
        let proj = Projection::new(origin);
        let victim = proj.to_geo(Local::new(100.0, 0.0));
        let scene = Scene {
            objects: vec![SceneObject {
                kind: ObjectKind::Victim,
                location: victim,
            }],
            ..Scene::default()
        };
        (scene, proj)
    }

    fn view(pos: Local, now: Millis) -> CameraView<'static> {
        CameraView {
            uav: "blue",
            position: pos,
            altitude_m: 30.0,
            half_fov_deg: DEFAULT_HALF_FOV_DEG,
            frame: 0,
            now,
            ignore: &[],
            ignore_radius: 0.0,
        }
    }

    #[test]
    fn outside_footprint_sees_nothing() {
        let (scene, proj) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(detect(&scene, &proj, &view(Local::new(0.0, 0.0), 0), &mut rng).is_none());
    }

    #[test]
    fn clear_scores_respect_profile_floor() {
        let (scene, proj) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let prof = scene.noise.profile(ObjectKind::Victim, Weather::Clear);
        let mut min_c = f64::MAX;
        let mut min_r = f64::MAX;
        for _ in 0..1000 {
            let (_, d) = detect(&scene, &proj, &view(Local::new(95.0, 0.0), 0), &mut rng).unwrap();
            assert!(d.is_valid());
            min_c = min_c.min(d.confidence);
            min_r = min_r.min(d.reliability);
        }
        assert!(min_c >= prof.confidence.floor());
        assert!(min_r >= prof.reliability.floor());
        // the empirical minimum should sit near the floor, not far above it
        assert!(min_c - prof.confidence.floor() < 0.01);
    }

    #[test]
    fn mist_lowers_reliability_only() {
        let (mut scene, proj) = setup();
        scene.weather.push(WeatherChange {
            at_ms: 1000,
            weather: Weather::Misty,
        });
        let clear = scene.noise.profile(ObjectKind::Victim, scene.weather_at(0));
        let misty = scene
            .noise
            .profile(ObjectKind::Victim, scene.weather_at(1000));
        assert_eq!(clear.confidence, misty.confidence);
        assert!(misty.reliability.mean < clear.reliability.mean);
        let n = 500;
        let mean = |now| {
            let mut rng2 = ChaCha8Rng::seed_from_u64(3);
            (0..n)
                .map(|_| {
                    detect(&scene, &proj, &view(Local::new(100.0, 0.0), now), &mut rng2)
                        .unwrap()
                        .1
                        .reliability
                })
                .sum::<f64>()
                / n as f64
        };
        assert!(mean(1000) < mean(0) - 0.3);
    }

    #[test]
    fn ignored_locations_are_skipped() {
        let (scene, proj) = setup();
        let ignore = [Local::new(100.0, 0.0)];
        let v = CameraView {
            ignore: &ignore,
            ignore_radius: 5.0,
            ..view(Local::new(100.0, 0.0), 0)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(detect(&scene, &proj, &v, &mut rng).is_none());
    }
}
