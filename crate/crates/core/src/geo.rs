//! City registry and radius membership.

use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EARTH_RADIUS_KM: f64 = 6371.0;
pub const DEFAULT_RADIUS_KM: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        let p = LatLon { lat, lon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !((-90.0..=90.0).contains(&self.lat) && (-180.0..=180.0).contains(&self.lon)) {
            return Err(Error::CoordinateOutOfRange {
                lat: self.lat,
                lon: self.lon,
            });
        }
        Ok(())
    }
}

/// Great-circle distance on a sphere of radius [`EARTH_RADIUS_KM`].
pub fn haversine_km(a: LatLon, b: LatLon) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    Ok(haversine_unchecked(a, b))
}

fn haversine_unchecked(a: LatLon, b: LatLon) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    // Clamp guards against h drifting a hair above 1 for antipodal points.
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct City {
    pub name: String,
    pub lat: f64,
    pub lon: f64,
    pub radius_km: f64,
}

impl City {
    pub fn new(name: impl Into<String>, lat: f64, lon: f64, radius_km: f64) -> Result<Self> {
        let name = name.into();
        LatLon::new(lat, lon)?;
        if name.trim().is_empty() {
            return Err(Error::InvalidArgument("city name must not be empty".into()));
        }
        if !(radius_km > 0.0 && radius_km.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "radius for {name} must be positive, got {radius_km}"
            )));
        }
        Ok(City {
            name,
            lat,
            lon,
            radius_km,
        })
    }

    pub fn center(&self) -> LatLon {
        LatLon {
            lat: self.lat,
            lon: self.lon,
        }
    }
}

/// Ordered set of surveilled cities.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CityRegistry {
    cities: Vec<City>,
}

impl CityRegistry {
    pub fn new(cities: Vec<City>) -> Result<Self> {
        for (i, c) in cities.iter().enumerate() {
            if cities[..i].iter().any(|d| d.name == c.name) {
                return Err(Error::InvalidArgument(format!("duplicate city {}", c.name)));
            }
        }
        Ok(CityRegistry { cities })
    }

    pub fn cities(&self) -> &[City] {
        &self.cities
    }

    pub fn len(&self) -> usize {
        self.cities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cities.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&City> {
        self.cities.iter().find(|c| c.name == name)
    }

    /// Nearest city whose radius contains `location`. Equal distances go
    /// to the city listed first.
    pub fn assign(&self, location: Option<LatLon>) -> Option<&City> {
        let p = location?;
        if p.validate().is_err() {
            return None;
        }
        let mut best: Option<(&City, f64)> = None;
        for city in &self.cities {
            let d = haversine_unchecked(p, city.center());
            if d <= city.radius_km && best.is_none_or(|(_, bd)| d < bd) {
                best = Some((city, d));
            }
        }
        best.map(|(c, _)| c)
    }

    /// `name<TAB>lat<TAB>lon<TAB>radius_km` per line; the radius column may
    /// be omitted. Blank lines and `#` comments are skipped.
    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut cities = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches(['\r', '\n']);
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if !(3..=4).contains(&cols.len()) {
                return Err(Error::parse(n + 1, "expected name, lat, lon[, radius_km]"));
            }
            let num = |s: &str| -> Result<f64> {
                s.trim()
                    .parse()
                    .map_err(|_| Error::parse(n + 1, format!("bad number {s:?}")))
            };
            let radius = match cols.get(3) {
                Some(r) => num(r)?,
                None => DEFAULT_RADIUS_KM,
            };
            let city = City::new(cols[0].trim(), num(cols[1])?, num(cols[2])?, radius)
                .map_err(|e| Error::parse(n + 1, e.to_string()))?;
            cities.push(city);
        }
        Self::new(cities)
    }
}
