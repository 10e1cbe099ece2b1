use crate::config::{Rect, ScenarioConfig, VisibilityRule};

use super::pedestrian::Pedestrian;
use super::vehicle::VehicleState;

/// Whether the ego at `(p, 0)` can see `ped` under the configured rule.
pub fn is_visible(ego: &VehicleState, ped: &Pedestrian, cfg: &ScenarioConfig) -> bool {
    let vis = &cfg.visibility;
    match vis.rule {
        VisibilityRule::Rectangular => {
            vis.ego_p_min < ego.p
                && ego.p < vis.ego_p_max
                && ped.y - vis.lateral_half_width < 0.0
                && 0.0 < ped.y + vis.lateral_half_width
        }
        VisibilityRule::LineOfSight => !segment_intersects_rect([ego.p, 0.0], [ped.x, ped.y], &cfg.occluder),
    }
}

pub fn visible_pedestrians<'a, I>(ego: &VehicleState, peds: I, cfg: &ScenarioConfig) -> Vec<&'a Pedestrian>
where
    I: IntoIterator<Item = &'a Pedestrian>,
{
    peds.into_iter().filter(|p| p.active && is_visible(ego, p, cfg)).collect()
}

/// Slab test (Liang-Barsky) for the closed segment `a -> b` against a closed
/// axis-aligned rectangle.
pub fn segment_intersects_rect(a: [f64; 2], b: [f64; 2], rect: &Rect) -> bool {
    let (lo, hi) = (rect.min(), rect.max());
    let (mut t0, mut t1) = (0.0_f64, 1.0_f64);
    for axis in 0..2 {
        let d = b[axis] - a[axis];
        if d == 0.0 {
            if a[axis] < lo[axis] || a[axis] > hi[axis] {
                return false;
            }
            continue;
        }
        let (mut ta, mut tb) = ((lo[axis] - a[axis]) / d, (hi[axis] - a[axis]) / d);
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        t0 = t0.max(ta);
        t1 = t1.min(tb);
        if t0 > t1 {
            return false;
        }
    }
    true
}

/// Smallest distance between the ego at `(p, 0)` and any active pedestrian,
/// `inf` when there is none.
pub fn min_distance<'a, I>(ego: &VehicleState, peds: I) -> f64
where
    I: IntoIterator<Item = &'a Pedestrian>,
{
    peds.into_iter().filter(|p| p.active).map(|p| (ego.p - p.x).hypot(p.y)).fold(f64::INFINITY, f64::min)
}

/// Strict inequality: a pedestrian exactly `d_min` away is not a collision.
pub fn check_collision<'a, I>(ego: &VehicleState, peds: I, d_min: f64) -> bool
where
    I: IntoIterator<Item = &'a Pedestrian>,
{
    min_distance(ego, peds) < d_min
}
