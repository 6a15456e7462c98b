//! Great-circle distances and proximity features relative to an event catalog.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::Column;

/// Mean Earth radius in km (IUGG).
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// A location on the sphere, in degrees. Latitude lies in [-90, 90] and
/// longitude in (-180, 180].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

impl GeoPoint {
    /// Validate and normalize. Longitudes are wrapped into (-180, 180], so
    /// -180 and 180 name the same meridian.
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !lat.is_finite() || !lon.is_finite() {
            return Err(Error::input(format!("non-finite coordinate ({lat}, {lon})")));
        }
        if !(-90.0..=90.0).contains(&lat) {
            return Err(Error::input(format!("latitude {lat} outside [-90, 90]")));
        }
        let mut lon = (lon + 180.0).rem_euclid(360.0) - 180.0;
        if lon == -180.0 {
            lon = 180.0;
        }
        Ok(GeoPoint { lat, lon })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }
}

/// Haversine great-circle distance in km.
pub fn haversine(a: GeoPoint, b: GeoPoint) -> f64 {
    // Fixed argument order makes the result exactly symmetric.
    let (p, q) = if (a.lat, a.lon) <= (b.lat, b.lon) { (a, b) } else { (b, a) };
    let (phi1, phi2) = (p.lat.to_radians(), q.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (q.lon - p.lon).to_radians();
    let s1 = (dphi / 2.0).sin();
    let s2 = (dlambda / 2.0).sin();
    let h = (s1 * s1 + phi1.cos() * phi2.cos() * s2 * s2).clamp(0.0, 1.0);
    2.0 * EARTH_RADIUS_KM * h.sqrt().atan2((1.0 - h).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub id: i64,
    pub location: GeoPoint,
    /// Years before the reference date.
    pub time: f64,
    pub size: f64,
    /// Binary attributes aligned with [`EventCatalog::flag_names`].
    pub flags: Vec<bool>,
}

/// Validated events, kept sorted by ascending id.
#[derive(Debug, Clone, PartialEq)]
pub struct EventCatalog {
    flag_names: Vec<String>,
    events: Vec<Event>,
}

impl EventCatalog {
    pub fn new(flag_names: Vec<String>, mut events: Vec<Event>) -> Result<Self> {
        let mut ids = HashSet::new();
        for e in &events {
            if !ids.insert(e.id) {
                return Err(Error::input(format!("duplicate event id {}", e.id)));
            }
            if !(e.time.is_finite() && e.time >= 0.0) {
                return Err(Error::input(format!("event {}: time must be finite and >= 0", e.id)));
            }
            if !(e.size.is_finite() && e.size >= 0.0) {
                return Err(Error::input(format!("event {}: size must be finite and >= 0", e.id)));
            }
            if e.flags.len() != flag_names.len() {
                return Err(Error::input(format!(
                    "event {}: expected {} flags, found {}",
                    e.id,
                    flag_names.len(),
                    e.flags.len()
                )));
            }
        }
        events.sort_by_key(|e| e.id);
        Ok(EventCatalog { flag_names, events })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn flag_names(&self) -> &[String] {
        &self.flag_names
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceScale {
    #[default]
    Km,
    ThousandKm,
}

impl DistanceScale {
    pub fn from_km(self, km: f64) -> f64 {
        match self {
            DistanceScale::Km => km,
            DistanceScale::ThousandKm => km / 1000.0,
        }
    }

    pub fn to_km(self, v: f64) -> f64 {
        match self {
            DistanceScale::Km => v,
            DistanceScale::ThousandKm => v * 1000.0,
        }
    }
}

impl std::str::FromStr for DistanceScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "km" => Ok(DistanceScale::Km),
            "thousand-km" | "1000km" => Ok(DistanceScale::ThousandKm),
            other => Err(Error::config(format!("unknown distance scale '{other}'"))),
        }
    }
}

/// Names of the proximity columns, in emission order.
pub fn feature_names(k: usize, flag_names: &[String]) -> Vec<String> {
    let mut names = Vec::new();
    for i in 1..=k {
        names.push(format!("dist_near_{i}"));
        names.push(format!("time_near_{i}"));
        names.push(format!("size_near_{i}"));
        for f in flag_names {
            names.push(format!("{f}_near_{i}"));
        }
    }
    for j in 2..=k {
        names.push(format!("dist_near_mean_{j}"));
    }
    for i in 1..=k {
        names.push(format!("dist_recent_{i}"));
    }
    for j in 2..=k {
        names.push(format!("dist_recent_mean_{j}"));
    }
    for i in 1..=k {
        names.push(format!("dist_large_{i}"));
    }
    names
}

/// Proximity features for every observation.
///
/// Per observation: distance, time, size and flags of the `k` nearest
/// events; distances to the `k` most recent and `k` largest events; and the
/// running means of the nearest and most-recent distances. Every ordering
/// breaks ties by ascending event id.
pub fn featurize(
    points: &[GeoPoint],
    catalog: &EventCatalog,
    k: usize,
    scale: DistanceScale,
) -> Result<Vec<Column>> {
    if k == 0 {
        return Err(Error::config("k must be positive"));
    }
    if catalog.len() < k {
        return Err(Error::config(format!(
            "catalog has {} events but k = {k}",
            catalog.len()
        )));
    }
    let events = catalog.events();
    // Stable sorts over the id-ordered catalog give the id tie-break.
    let mut recent: Vec<usize> = (0..events.len()).collect();
    recent.sort_by(|&a, &b| events[a].time.total_cmp(&events[b].time));
    recent.truncate(k);
    let mut largest: Vec<usize> = (0..events.len()).collect();
    largest.sort_by(|&a, &b| events[b].size.total_cmp(&events[a].size));
    largest.truncate(k);

    let names = feature_names(k, catalog.flag_names());
    let rows: Vec<Vec<f64>> = points
        .par_iter()
        .map(|&p| {
            let dist: Vec<f64> = events
                .iter()
                .map(|e| scale.from_km(haversine(p, e.location)))
                .collect();
            let mut order: Vec<usize> = (0..events.len()).collect();
            order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]));
            let mut row = Vec::with_capacity(names.len());
            for &e in &order[..k] {
                row.push(dist[e]);
                row.push(events[e].time);
                row.push(events[e].size);
                row.extend(events[e].flags.iter().map(|&f| if f { 1.0 } else { 0.0 }));
            }
            push_running_means(&mut row, order[..k].iter().map(|&e| dist[e]));
            row.extend(recent.iter().map(|&e| dist[e]));
            push_running_means(&mut row, recent.iter().map(|&e| dist[e]));
            row.extend(largest.iter().map(|&e| dist[e]));
            row
        })
        .collect();

    Ok(names
        .into_iter()
        .enumerate()
        .map(|(j, name)| Column::numeric(name, rows.iter().map(|r| r[j]).collect()))
        .collect())
}

fn push_running_means(row: &mut Vec<f64>, dists: impl Iterator<Item = f64>) {
    let mut sum = 0.0;
    for (i, d) in dists.enumerate() {
        sum += d;
        if i >= 1 {
            row.push(sum / (i + 1) as f64);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    fn ev(id: i64, lat: f64, lon: f64, time: f64, size: f64) -> Event {
        Event {
            id,
            location: pt(lat, lon),
            time,
            size,
            flags: vec![],
        }
    }

    #[test]
    fn longitude_normalization() {
        assert_eq!(pt(0.0, -180.0), pt(0.0, 180.0));
        assert_eq!(pt(10.0, 190.0).lon(), -170.0);
        assert_eq!(pt(10.0, -190.0).lon(), 170.0);
        assert!(GeoPoint::new(91.0, 0.0).is_err());
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
        assert!(GeoPoint::new(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn haversine_trivial_cases() {
        let p = pt(32.0, -117.0);
        assert_eq!(haversine(p, p), 0.0);
        let half = haversine(pt(0.0, 0.0), pt(0.0, 180.0));
        assert!((half - 20015.1).abs() < 0.1, "{half}");
        assert!((half - std::f64::consts::PI * EARTH_RADIUS_KM).abs() < 1e-9);
    }

    #[test]
    fn singleton_catalog() {
        let cat = EventCatalog::new(vec![], vec![ev(1, 31.0, -110.0, 2.0, 9.0)]).unwrap();
        let obs = pt(32.0, -117.0);
        let d = haversine(obs, cat.events()[0].location);
        let cols = featurize(&[obs], &cat, 1, DistanceScale::Km).unwrap();
        let get = |n: &str| cols.iter().find(|c| c.name == n).unwrap().values[0];
        assert_eq!(get("dist_near_1"), d);
        assert_eq!(get("dist_recent_1"), d);
        assert_eq!(get("dist_large_1"), d);
        assert_eq!(get("time_near_1"), 2.0);
        assert_eq!(get("size_near_1"), 9.0);
    }

    #[test]
    fn recency_ties_prefer_lower_ids() {
        let cat = EventCatalog::new(
            vec![],
            vec![
                ev(30, 40.0, -100.0, 5.0, 1.0),
                ev(10, 35.0, -90.0, 5.0, 1.0),
                ev(20, 45.0, -80.0, 5.0, 1.0),
            ],
        )
        .unwrap();
        let obs = pt(0.0, 0.0);
        let cols = featurize(&[obs], &cat, 2, DistanceScale::Km).unwrap();
        let get = |n: &str| cols.iter().find(|c| c.name == n).unwrap().values[0];
        assert_eq!(get("dist_recent_1"), haversine(obs, pt(35.0, -90.0)));
        assert_eq!(get("dist_recent_2"), haversine(obs, pt(45.0, -80.0)));
        assert_eq!(get("dist_large_1"), haversine(obs, pt(35.0, -90.0)));
    }

    #[test]
    fn catalog_validation() {
        assert!(EventCatalog::new(vec![], vec![ev(1, 0.0, 0.0, 1.0, 1.0), ev(1, 1.0, 1.0, 1.0, 1.0)]).is_err());
        assert!(EventCatalog::new(vec![], vec![ev(1, 0.0, 0.0, -1.0, 1.0)]).is_err());
        let cat = EventCatalog::new(vec![], vec![ev(1, 0.0, 0.0, 1.0, 1.0)]).unwrap();
        assert!(matches!(
            featurize(&[pt(0.0, 0.0)], &cat, 2, DistanceScale::Km),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn thousand_km_scale() {
        let cat = EventCatalog::new(vec![], vec![ev(1, 0.0, 1.0, 1.0, 1.0)]).unwrap();
        let km = featurize(&[pt(0.0, 0.0)], &cat, 1, DistanceScale::Km).unwrap();
        let tk = featurize(&[pt(0.0, 0.0)], &cat, 1, DistanceScale::ThousandKm).unwrap();
        assert_eq!(tk[0].values[0], km[0].values[0] / 1000.0);
    }
}
