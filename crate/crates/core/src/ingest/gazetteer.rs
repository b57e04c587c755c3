use std::collections::HashMap;
use std::io::Read;

use thiserror::Error;

use super::StateCode;

#[derive(Debug, Error)]
pub enum GazetteerError {
    #[error("gazetteer row {row}: {msg}")]
    Row { row: usize, msg: String },
    #[error("gazetteer CSV: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min_lat: f64,
    pub min_lon: f64,
    pub max_lat: f64,
    pub max_lon: f64,
}

impl BoundingBox {
    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        (self.min_lat..=self.max_lat).contains(&lat) && (self.min_lon..=self.max_lon).contains(&lon)
    }
}

/// Offline geolocation table: normalized place names and per-state GPS boxes.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    names: HashMap<String, StateCode>,
    /// Sorted by state code; boxes may overlap and the first hit wins.
    boxes: Vec<(StateCode, BoundingBox)>,
}

/// Lowercases and collapses runs of whitespace.
pub fn normalize_location(s: &str) -> String {
    s.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>().join(" ")
}

impl Gazetteer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_name(&mut self, key: &str, state: StateCode) {
        self.names.insert(normalize_location(key), state);
    }

    pub fn add_box(&mut self, state: StateCode, bbox: BoundingBox) {
        let at = self.boxes.partition_point(|(s, _)| *s <= state);
        self.boxes.insert(at, (state, bbox));
    }

    pub fn locate(&self, lat: f64, lon: f64) -> Option<StateCode> {
        self.boxes.iter().find(|(_, b)| b.contains(lat, lon)).map(|(s, _)| *s)
    }

    pub fn lookup_name(&self, location: &str) -> Option<StateCode> {
        self.names.get(&normalize_location(location)).copied()
    }

    pub fn name_count(&self) -> usize {
        self.names.len()
    }

    pub fn box_count(&self) -> usize {
        self.boxes.len()
    }

    /// Writes the table in the format [`Gazetteer::from_csv`] reads: name
    /// rows sorted by key, then box rows in state order.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<(), GazetteerError> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["kind", "state", "key_or_minlat", "minlon", "maxlat", "maxlon"])?;
        let mut names: Vec<(&String, &StateCode)> = self.names.iter().collect();
        names.sort();
        for (key, state) in names {
            wtr.write_record(["name", state.as_str(), key, "", "", ""])?;
        }
        for (state, b) in &self.boxes {
            wtr.write_record([
                "box".to_string(),
                state.as_str().to_string(),
                b.min_lat.to_string(),
                b.min_lon.to_string(),
                b.max_lat.to_string(),
                b.max_lon.to_string(),
            ])?;
        }
        wtr.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Reads `kind,state,key_or_minlat,minlon,maxlat,maxlon` rows. Any bad
    /// row rejects the whole file.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, GazetteerError> {
        let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
        let mut gaz = Gazetteer::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = i + 2;
            let err = |msg: String| GazetteerError::Row { row, msg };
            let field = |k: usize| rec.get(k).map(str::trim).unwrap_or("");
            let state: StateCode = field(1).parse().map_err(|_| err(format!("bad state {:?}", field(1))))?;
            match field(0) {
                "name" => {
                    let key = normalize_location(field(2));
                    if key.is_empty() {
                        return Err(err("empty name key".into()));
                    }
                    if let Some(prev) = gaz.names.get(&key) {
                        if *prev != state {
                            return Err(err(format!("{key:?} maps to both {prev} and {state}")));
                        }
                    }
                    gaz.names.insert(key, state);
                }
                "box" => {
                    let num = |k: usize| {
                        field(k)
                            .parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| err(format!("column {} is not a number: {:?}", k + 1, field(k))))
                    };
                    let bbox = BoundingBox {
                        min_lat: num(2)?,
                        min_lon: num(3)?,
                        max_lat: num(4)?,
                        max_lon: num(5)?,
                    };
                    if bbox.min_lat > bbox.max_lat || bbox.min_lon > bbox.max_lon {
                        return Err(err("box minimum exceeds maximum".into()));
                    }
                    gaz.add_box(state, bbox);
                }
                other => return Err(err(format!("unknown kind {other:?}"))),
            }
        }
        Ok(gaz)
    }
}
