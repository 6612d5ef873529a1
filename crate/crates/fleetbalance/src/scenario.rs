//! Scenario domain types, validation and file ingestion.
//!
//! A scenario is the single source of truth for both optimization models:
//! stations with admissible stock bounds, the vehicle fleet with battery
//! autonomies, the inter-station distance matrix, the cost rate and the
//! incentive scheme.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;
use std::path::Path;

/// Vehicle classes supported by the planner. Small classes can be carried
/// by a staff van regardless of their remaining battery range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VehicleClass {
    Car,
    EBike,
    KickScooter,
    Moped,
    Quad,
    Other,
}

impl VehicleClass {
    /// True for classes a staff van can pick up (lifting battery feasibility
    /// for staff-executed moves when the scenario enables the relaxation).
    pub fn van_portable(self) -> bool {
        matches!(self, VehicleClass::EBike | VehicleClass::KickScooter)
    }
}

impl fmt::Display for VehicleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            VehicleClass::Car => "car",
            VehicleClass::EBike => "e-bike",
            VehicleClass::KickScooter => "kick-scooter",
            VehicleClass::Moped => "moped",
            VehicleClass::Quad => "quad",
            VehicleClass::Other => "other",
        };
        f.write_str(s)
    }
}

/// Relaxation policy for staff-executed moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Relaxation {
    #[default]
    None,
    /// Staff may move van-portable vehicles by van, ignoring battery range.
    StaffVan,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_min: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub id: u32,
    /// Station id where the vehicle sits before relocation.
    pub station: u32,
    pub autonomy_km: f64,
    pub class: VehicleClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub n_min: u32,
    pub n_max: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncentiveLevel {
    /// Incentive paid to the user as a fraction of the full relocation cost.
    pub rate: f64,
    /// Fraction of the reachable user population expected to accept a bid
    /// at this level.
    pub acceptance_rate: f64,
}

/// Reference values a bundled scenario ships with, used by reports to flag
/// discrepancies between computed and published results.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PublishedResults {
    pub rc: f64,
    pub rci: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub stations: Vec<Station>,
    pub defaults: Bounds,
    pub vehicles: Vec<Vehicle>,
    /// Row = origin station, column = destination station, in km.
    pub distances: Vec<Vec<f64>>,
    pub cost_per_km: f64,
    /// Count of users reachable by an incentive broadcast.
    pub user_population: u32,
    /// User incentive levels in escalation order. The staff fallback level
    /// is implicit and appended by the model builders.
    pub levels: Vec<IncentiveLevel>,
    #[serde(default)]
    pub relaxation: Relaxation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub published: Option<PublishedResults>,
}

/// Raw document form: `distances` may be an inline matrix or a reference
/// to a CSV side file.
#[derive(Deserialize)]
struct ScenarioDoc {
    #[serde(default)]
    name: Option<String>,
    stations: Vec<Station>,
    defaults: Bounds,
    vehicles: Vec<Vehicle>,
    distances: DistancesSpec,
    cost_per_km: f64,
    user_population: u32,
    levels: Vec<IncentiveLevel>,
    #[serde(default)]
    relaxation: Relaxation,
    #[serde(default)]
    published: Option<PublishedResults>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DistancesSpec {
    Matrix(Vec<Vec<f64>>),
    Csv { csv: String },
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("distance matrix is {rows}x{cols} but the scenario has {stations} stations")]
    DimensionMismatch {
        rows: usize,
        cols: usize,
        stations: usize,
    },
    #[error("distances reference a CSV side file ({0}) but no base directory is available")]
    CsvWithoutBase(String),
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("bad distance CSV: {0}")]
    Csv(String),
}

/// Parse a scenario document from text. Documents that reference a CSV side
/// file for distances cannot be parsed without a base directory; use
/// [`load_scenario`] for those.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    parse_scenario_impl(text, None)
}

/// Load a scenario from a file, resolving CSV side references relative to
/// the scenario file's directory.
pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario_impl(&text, path.parent())
}

fn parse_scenario_impl(text: &str, base: Option<&Path>) -> Result<Scenario, ScenarioError> {
    let doc: ScenarioDoc = serde_json::from_str(text).map_err(|e| ScenarioError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let distances = match doc.distances {
        DistancesSpec::Matrix(m) => m,
        DistancesSpec::Csv { csv } => {
            let base = base.ok_or_else(|| ScenarioError::CsvWithoutBase(csv.clone()))?;
            read_distances_csv(&base.join(&csv))?
        }
    };
    let n = doc.stations.len();
    let rows = distances.len();
    let cols = distances.iter().map(Vec::len).max().unwrap_or(0);
    if rows != n || distances.iter().any(|r| r.len() != n) {
        return Err(ScenarioError::DimensionMismatch {
            rows,
            cols,
            stations: n,
        });
    }
    Ok(Scenario {
        name: doc.name,
        stations: doc.stations,
        defaults: doc.defaults,
        vehicles: doc.vehicles,
        distances,
        cost_per_km: doc.cost_per_km,
        user_population: doc.user_population,
        levels: doc.levels,
        relaxation: doc.relaxation,
        published: doc.published,
    })
}

fn read_distances_csv(path: &Path) -> Result<Vec<Vec<f64>>, ScenarioError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| ScenarioError::Io {
            path: path.display().to_string(),
            source: std::io::Error::other(e),
        })?;
    let mut matrix = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| ScenarioError::Csv(e.to_string()))?;
        let row: Result<Vec<f64>, _> = record
            .iter()
            .map(|f| f.trim().parse::<f64>().map_err(|e| e.to_string()))
            .collect();
        matrix.push(row.map_err(ScenarioError::Csv)?);
    }
    Ok(matrix)
}

/// Serialize a scenario back to its document form.
pub fn serialize_scenario(s: &Scenario) -> String {
    serde_json::to_string_pretty(s).expect("scenario serialization cannot fail")
}

/// Machine-readable invariant violation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub code: &'static str,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.detail)
    }
}

fn violation(code: &'static str, detail: String) -> Violation {
    Violation { code, detail }
}

impl Scenario {
    pub fn station_count(&self) -> usize {
        self.stations.len()
    }

    pub fn vehicle_count(&self) -> usize {
        self.vehicles.len()
    }

    /// Position of a station id in the station list.
    pub fn station_index(&self, id: u32) -> Option<usize> {
        self.stations.iter().position(|s| s.id == id)
    }

    pub fn vehicle_index(&self, id: u32) -> Option<usize> {
        self.vehicles.iter().position(|v| v.id == id)
    }

    /// Effective stock bounds for a station, falling back to the globals.
    pub fn bounds(&self, station_idx: usize) -> Bounds {
        let st = &self.stations[station_idx];
        Bounds {
            n_min: st.n_min.unwrap_or(self.defaults.n_min),
            n_max: st.n_max.unwrap_or(self.defaults.n_max),
        }
    }

    pub fn distance(&self, from_idx: usize, to_idx: usize) -> f64 {
        self.distances[from_idx][to_idx]
    }

    /// Station index each vehicle sits at. Panics on dangling station ids;
    /// validate first.
    pub fn vehicle_stations(&self) -> Vec<usize> {
        self.vehicles
            .iter()
            .map(|v| {
                self.station_index(v.station)
                    .expect("vehicle references unknown station")
            })
            .collect()
    }

    /// Per-station initial vehicle counts, in station-list order.
    pub fn stock_counts(&self) -> Vec<u32> {
        let mut counts = vec![0u32; self.stations.len()];
        for v in &self.vehicles {
            if let Some(idx) = self.station_index(v.station) {
                counts[idx] += 1;
            }
        }
        counts
    }

    /// Check every invariant; returns an empty list iff the scenario is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        for st in &self.stations {
            if !seen.insert(st.id) {
                out.push(violation(
                    "duplicate-station-id",
                    format!("station id {} appears more than once", st.id),
                ));
            }
        }
        for (idx, _) in self.stations.iter().enumerate() {
            let b = self.bounds(idx);
            if b.n_min > b.n_max {
                out.push(violation(
                    "inverted-bounds",
                    format!(
                        "station {} has n_min {} > n_max {}",
                        self.stations[idx].id, b.n_min, b.n_max
                    ),
                ));
            }
        }
        let mut seen = HashSet::new();
        for v in &self.vehicles {
            if !seen.insert(v.id) {
                out.push(violation(
                    "duplicate-vehicle-id",
                    format!("vehicle id {} appears more than once", v.id),
                ));
            }
            if v.autonomy_km < 0.0 || !v.autonomy_km.is_finite() {
                out.push(violation(
                    "negative-autonomy",
                    format!("vehicle {} has autonomy {} km", v.id, v.autonomy_km),
                ));
            }
            if self.station_index(v.station).is_none() {
                out.push(violation(
                    "unknown-station",
                    format!("vehicle {} sits at unknown station {}", v.id, v.station),
                ));
            }
        }
        let n = self.stations.len();
        if self.distances.len() != n || self.distances.iter().any(|r| r.len() != n) {
            out.push(violation(
                "dimension-mismatch",
                format!("distance matrix is not {n}x{n}"),
            ));
        } else {
            for i in 0..n {
                if self.distances[i][i] != 0.0 {
                    out.push(violation(
                        "nonzero-diagonal",
                        format!("D[{0}][{0}] = {1}", i + 1, self.distances[i][i]),
                    ));
                }
                for j in 0..n {
                    let d = self.distances[i][j];
                    if d < 0.0 || !d.is_finite() {
                        out.push(violation(
                            "negative-distance",
                            format!("D[{}][{}] = {}", i + 1, j + 1, d),
                        ));
                    }
                }
            }
        }
        if !(self.cost_per_km > 0.0 && self.cost_per_km.is_finite()) {
            out.push(violation(
                "nonpositive-cost-rate",
                format!("cost_per_km = {}", self.cost_per_km),
            ));
        }
        for (u, level) in self.levels.iter().enumerate() {
            if !(level.rate > 0.0 && level.rate <= 1.0) {
                out.push(violation(
                    "bad-incentive-rate",
                    format!("level {} rate {} outside (0, 1]", u + 1, level.rate),
                ));
            }
            if !(0.0..=1.0).contains(&level.acceptance_rate) {
                out.push(violation(
                    "bad-acceptance-rate",
                    format!(
                        "level {} acceptance rate {} outside [0, 1]",
                        u + 1,
                        level.acceptance_rate
                    ),
                ));
            }
        }
        // Pigeonhole check: a feasible post-relocation stock vector must exist.
        let total: u64 = self.vehicles.len() as u64;
        let min_sum: u64 = (0..n).map(|j| self.bounds(j).n_min as u64).sum();
        let max_sum: u64 = (0..n).map(|j| self.bounds(j).n_max as u64).sum();
        if total < min_sum || total > max_sum {
            out.push(violation(
                "infeasible-stock-bounds",
                format!("|K| = {total} outside [sum n_min = {min_sum}, sum n_max = {max_sum}]"),
            ));
        }
        out
    }

    /// Stable digest of the scenario document, used to tie built models back
    /// to the scenario they came from.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let canonical = serde_json::to_string(self).expect("scenario serialization cannot fail");
        let hash = Sha256::digest(canonical.as_bytes());
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn scenario1() -> Scenario {
        load_scenario(Path::new("../../scenarios/scenario1.json")).unwrap()
    }

    fn tiny() -> Scenario {
        parse_scenario(
            r#"{
                "stations": [{"id": 1}, {"id": 2, "n_min": 0}],
                "defaults": {"n_min": 1, "n_max": 2},
                "vehicles": [
                    {"id": 1, "station": 1, "autonomy_km": 5.0, "class": "car"},
                    {"id": 2, "station": 1, "autonomy_km": 2.0, "class": "e-bike"}
                ],
                "distances": [[0, 3], [3, 0]],
                "cost_per_km": 1.0,
                "user_population": 10,
                "levels": [{"rate": 0.5, "acceptance_rate": 0.1}]
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn bundled_scenario1_fields() {
        let s = scenario1();
        assert_eq!(s.station_count(), 6);
        assert_eq!(s.vehicle_count(), 60);
        assert_eq!(s.defaults.n_min, 5);
        assert_eq!(s.defaults.n_max, 20);
        assert_eq!(s.user_population, 200);
        assert_eq!(s.cost_per_km, 1.0);
        assert_eq!(s.relaxation, Relaxation::None);
        assert!(s.validate().is_empty());
        assert_eq!(s.stock_counts(), vec![18, 14, 2, 4, 3, 19]);
        for j in 0..6 {
            assert_eq!(s.bounds(j), Bounds { n_min: 5, n_max: 20 });
        }
    }

    #[test]
    fn bundled_scenario2_fields() {
        let s = load_scenario(Path::new("../../scenarios/scenario2.json")).unwrap();
        assert!(s.validate().is_empty());
        assert_eq!(s.relaxation, Relaxation::StaffVan);
        assert!(s.vehicles.iter().all(|v| v.class == VehicleClass::EBike));
        assert_eq!(s.stock_counts(), vec![18, 14, 2, 4, 3, 19]);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let text = r#"{
            "stations": [{"id": 1}, {"id": 2}],
            "defaults": {"n_min": 0, "n_max": 5},
            "vehicles": [],
            "distances": [[0, 1, 2], [1, 0, 3], [2, 3, 0]],
            "cost_per_km": 1.0,
            "user_population": 0,
            "levels": []
        }"#;
        match parse_scenario(text) {
            Err(ScenarioError::DimensionMismatch { rows: 3, cols: 3, stations: 2 }) => {}
            other => panic!("expected dimension mismatch, got {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse_scenario("{ not json") {
            Err(ScenarioError::Syntax { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_class_is_a_syntax_error() {
        let text = r#"{
            "stations": [{"id": 1}],
            "defaults": {"n_min": 0, "n_max": 5},
            "vehicles": [{"id": 1, "station": 1, "autonomy_km": 1, "class": "zeppelin"}],
            "distances": [[0]],
            "cost_per_km": 1.0,
            "user_population": 0,
            "levels": []
        }"#;
        assert!(matches!(parse_scenario(text), Err(ScenarioError::Syntax { .. })));
    }

    #[test]
    fn per_station_bounds_override_defaults() {
        let s = tiny();
        assert_eq!(s.bounds(0), Bounds { n_min: 1, n_max: 2 });
        assert_eq!(s.bounds(1), Bounds { n_min: 0, n_max: 2 });
    }

    #[test]
    fn csv_side_file_distances() {
        let dir = tempfile::tempdir().unwrap();
        let mut csv = std::fs::File::create(dir.path().join("dist.csv")).unwrap();
        writeln!(csv, "0,4\n4,0").unwrap();
        let path = dir.path().join("s.json");
        std::fs::write(
            &path,
            r#"{
                "stations": [{"id": 1}, {"id": 2}],
                "defaults": {"n_min": 0, "n_max": 5},
                "vehicles": [],
                "distances": {"csv": "dist.csv"},
                "cost_per_km": 1.0,
                "user_population": 0,
                "levels": []
            }"#,
        )
        .unwrap();
        let s = load_scenario(&path).unwrap();
        assert_eq!(s.distances, vec![vec![0.0, 4.0], vec![4.0, 0.0]]);
    }

    #[test]
    fn round_trip_is_identity() {
        for s in [tiny(), scenario1()] {
            let back = parse_scenario(&serialize_scenario(&s)).unwrap();
            assert_eq!(back, s);
        }
    }

    #[test]
    fn validation_flags_exactly_the_corrupted_field() {
        let cases: Vec<(&str, Box<dyn Fn(&mut Scenario)>)> = vec![
            ("duplicate-station-id", Box::new(|s| s.stations[1].id = 1)),
            ("inverted-bounds", Box::new(|s| s.stations[0].n_min = Some(9))),
            ("duplicate-vehicle-id", Box::new(|s| s.vehicles[1].id = 1)),
            ("negative-autonomy", Box::new(|s| s.vehicles[0].autonomy_km = -1.0)),
            ("unknown-station", Box::new(|s| s.vehicles[0].station = 9)),
            ("nonzero-diagonal", Box::new(|s| s.distances[0][0] = 1.0)),
            ("negative-distance", Box::new(|s| s.distances[0][1] = -2.0)),
            ("nonpositive-cost-rate", Box::new(|s| s.cost_per_km = 0.0)),
            ("bad-incentive-rate", Box::new(|s| s.levels[0].rate = 1.5)),
            ("bad-acceptance-rate", Box::new(|s| s.levels[0].acceptance_rate = -0.1)),
            ("infeasible-stock-bounds", Box::new(|s| s.defaults.n_min = 4)),
        ];
        for (code, corrupt) in cases {
            let mut s = tiny();
            corrupt(&mut s);
            let violations = s.validate();
            assert!(
                violations.iter().any(|v| v.code == code),
                "expected {code}, got {violations:?}"
            );
        }
    }

    #[test]
    fn stock_counts_track_the_input_file() {
        let mut s = scenario1();
        s.vehicles[59].station = 1;
        assert_eq!(s.stock_counts(), vec![19, 14, 2, 4, 3, 18]);
    }

    #[test]
    fn digest_is_stable_and_input_sensitive() {
        let a = tiny().digest();
        assert_eq!(a, tiny().digest());
        let mut s = tiny();
        s.cost_per_km = 2.0;
        assert_ne!(a, s.digest());
    }
}
