//! Loading observations, events and gazetteers; categorical encoding; splits.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::Read;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{self, derive_seed};
use crate::spatial::{Event, EventCatalog, GeoPoint};
use crate::table::{parse_f64, Column, FeatureTable};

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn is_missing(s: &str) -> bool {
    let s = s.trim();
    s.is_empty() || s.eq_ignore_ascii_case("na")
}

/// Zip codes are matched as zero-padded 5-character strings.
pub fn normalize_zip(raw: &str) -> String {
    let z = raw.trim();
    if !z.is_empty() && z.len() < 5 && z.bytes().all(|b| b.is_ascii_digit()) {
        format!("{z:0>5}")
    } else {
        z.to_string()
    }
}

/// Zip code to centroid lookup.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    entries: Vec<(String, GeoPoint)>,
    index: HashMap<String, usize>,
}

impl Gazetteer {
    pub fn new(entries: Vec<(String, GeoPoint)>) -> Result<Self> {
        let mut index = HashMap::with_capacity(entries.len());
        let entries: Vec<(String, GeoPoint)> = entries
            .into_iter()
            .map(|(z, p)| (normalize_zip(&z), p))
            .collect();
        for (i, (z, _)) in entries.iter().enumerate() {
            if index.insert(z.clone(), i).is_some() {
                return Err(Error::input(format!("gazetteer: duplicate zip '{z}'")));
            }
        }
        Ok(Gazetteer { entries, index })
    }

    /// Uniformly scattered centroids over the contiguous-US bounding box,
    /// with zips `00001..`. Stands in for a real gazetteer in simulations.
    pub fn synthetic(n: usize, seed: u64) -> Self {
        let mut rng = seed::stream(seed, &[seed::TAG_SIM, 0x9A2]);
        let entries = (0..n)
            .map(|i| {
                let lat = rng.random_range(25.0..49.0);
                let lon = rng.random_range(-124.0..-67.0);
                (format!("{:05}", i + 1), GeoPoint::new(lat, lon).expect("in range"))
            })
            .collect();
        Gazetteer::new(entries).expect("unique zips")
    }

    pub fn from_reader<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        let col = |name: &str| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::input(format!("gazetteer: missing column '{name}'")))
        };
        let (zc, lac, loc) = (col("zip")?, col("lat")?, col("lon")?);
        let mut entries = Vec::new();
        for (row, rec) in rd.records().enumerate() {
            let rec = rec?;
            let line = row + 2;
            let lat = parse_f64(rec.get(lac).unwrap_or_default(), "lat", line)?;
            let lon = parse_f64(rec.get(loc).unwrap_or_default(), "lon", line)?;
            let p = GeoPoint::new(lat, lon).map_err(|e| Error::input(format!("gazetteer line {line}: {e}")))?;
            entries.push((rec.get(zc).unwrap_or_default().to_string(), p));
        }
        Gazetteer::new(entries)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_reader(open(path)?)
    }

    pub fn lookup(&self, zip: &str) -> Option<GeoPoint> {
        self.index.get(&normalize_zip(zip)).map(|&i| self.entries[i].1)
    }

    pub fn entries(&self) -> &[(String, GeoPoint)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// How an attribute column is interpreted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AttributeSpec {
    Numeric { name: String },
    /// The first level is the reference and gets no indicator column.
    Categorical { name: String, levels: Vec<String> },
}

impl AttributeSpec {
    pub fn name(&self) -> &str {
        match self {
            AttributeSpec::Numeric { name } | AttributeSpec::Categorical { name, .. } => name,
        }
    }
}

/// Declares the observation file layout. Empty `attributes` means "infer":
/// every remaining column is numeric when all its cells parse, otherwise
/// categorical with its distinct values in sorted order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObservationSchema {
    pub id: String,
    pub outcome: Option<String>,
    pub attributes: Vec<AttributeSpec>,
    /// Unknown zips abort loading instead of being reported and skipped.
    pub strict: bool,
    /// Fill missing cells (median for numeric, mode for categorical).
    pub impute: bool,
}

impl Default for ObservationSchema {
    fn default() -> Self {
        ObservationSchema {
            id: "id".into(),
            outcome: None,
            attributes: Vec::new(),
            strict: true,
            impute: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttributeValues {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

/// A row dropped during loading.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub ids: Vec<String>,
    pub points: Vec<GeoPoint>,
    pub specs: Vec<AttributeSpec>,
    pub attributes: Vec<AttributeValues>,
    pub outcome: Option<(String, Vec<f64>)>,
    pub row_errors: Vec<RowError>,
}

impl Observations {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn encoder(&self) -> Encoder {
        Encoder::new(self.specs.clone())
    }
}

pub fn load_observations(
    path: &Path,
    schema: &ObservationSchema,
    gazetteer: Option<&Gazetteer>,
) -> Result<Observations> {
    observations_from_reader(open(path)?, schema, gazetteer)
}

pub fn observations_from_reader<R: Read>(
    r: R,
    schema: &ObservationSchema,
    gazetteer: Option<&Gazetteer>,
) -> Result<Observations> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    let pos = |name: &str| header.iter().position(|h| h == name);
    let id_col = pos(&schema.id)
        .ok_or_else(|| Error::input(format!("observations: missing id column '{}'", schema.id)))?;
    let coords = match (pos("lat"), pos("lon")) {
        (Some(a), Some(b)) => Some((a, b)),
        _ => None,
    };
    let zip_col = pos("zip");
    if coords.is_none() && zip_col.is_none() {
        return Err(Error::input("observations: need lat/lon columns or a zip column"));
    }
    if coords.is_none() && gazetteer.is_none() {
        return Err(Error::config("observations carry zips only; a gazetteer is required"));
    }
    let out_col = match &schema.outcome {
        Some(o) => Some(pos(o).ok_or_else(|| Error::input(format!("observations: missing outcome column '{o}'")))?),
        None => None,
    };
    let reserved = |j: usize| {
        j == id_col || Some(j) == out_col || Some(j) == zip_col || coords.is_some_and(|(a, b)| j == a || j == b)
    };
    let attr_cols: Vec<(String, usize)> = if schema.attributes.is_empty() {
        (0..header.len()).filter(|&j| !reserved(j)).map(|j| (header[j].clone(), j)).collect()
    } else {
        schema
            .attributes
            .iter()
            .map(|a| {
                pos(a.name())
                    .map(|j| (a.name().to_string(), j))
                    .ok_or_else(|| Error::input(format!("observations: missing attribute column '{}'", a.name())))
            })
            .collect::<Result<_>>()?
    };

    let mut ids = Vec::new();
    let mut points = Vec::new();
    let mut raw: Vec<Vec<String>> = vec![Vec::new(); attr_cols.len()];
    let mut lines = Vec::new();
    let mut outcome = Vec::new();
    let mut row_errors = Vec::new();
    for (row, rec) in rd.records().enumerate() {
        let rec = rec?;
        let line = row + 2;
        let cell = |j: usize| rec.get(j).unwrap_or_default();
        let point = match coords {
            Some((a, b)) => {
                let lat = parse_f64(cell(a), "lat", line)?;
                let lon = parse_f64(cell(b), "lon", line)?;
                GeoPoint::new(lat, lon).map_err(|e| Error::input(format!("line {line}: {e}")))?
            }
            None => {
                let zip = cell(zip_col.expect("checked"));
                match gazetteer.and_then(|g| g.lookup(zip)) {
                    Some(p) => p,
                    None => {
                        let message = format!("unknown zip '{}' at line {line}", normalize_zip(zip));
                        if schema.strict {
                            return Err(Error::input(message));
                        }
                        row_errors.push(RowError { line, message });
                        continue;
                    }
                }
            }
        };
        if let Some(j) = out_col {
            outcome.push(parse_f64(cell(j), &header[j], line)?);
        }
        ids.push(cell(id_col).to_string());
        points.push(point);
        lines.push(line);
        for (k, (_, j)) in attr_cols.iter().enumerate() {
            raw[k].push(cell(*j).to_string());
        }
    }

    let mut specs = Vec::with_capacity(attr_cols.len());
    let mut attributes = Vec::with_capacity(attr_cols.len());
    for (k, (name, _)) in attr_cols.iter().enumerate() {
        let spec = match schema.attributes.get(k) {
            Some(s) => s.clone(),
            None => infer_spec(name, &raw[k]),
        };
        let cells = std::mem::take(&mut raw[k]);
        attributes.push(parse_attribute(&spec, cells, &lines, schema.impute)?);
        specs.push(spec);
    }

    let mut seen = std::collections::HashSet::new();
    for id in &ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::input(format!("observations: duplicate id '{id}'")));
        }
    }

    Ok(Observations {
        ids,
        points,
        specs,
        attributes,
        outcome: schema.outcome.clone().map(|o| (o, outcome)),
        row_errors,
    })
}

fn infer_spec(name: &str, cells: &[String]) -> AttributeSpec {
    let numeric = cells
        .iter()
        .filter(|c| !is_missing(c))
        .all(|c| c.trim().parse::<f64>().is_ok_and(f64::is_finite));
    if numeric {
        AttributeSpec::Numeric { name: name.to_string() }
    } else {
        let levels: BTreeSet<&str> = cells.iter().filter(|c| !is_missing(c)).map(|c| c.trim()).collect();
        AttributeSpec::Categorical {
            name: name.to_string(),
            levels: levels.into_iter().map(str::to_string).collect(),
        }
    }
}

fn parse_attribute(
    spec: &AttributeSpec,
    cells: Vec<String>,
    lines: &[usize],
    impute: bool,
) -> Result<AttributeValues> {
    let missing: Vec<usize> = (0..cells.len()).filter(|&i| is_missing(&cells[i])).collect();
    if !missing.is_empty() && !impute {
        return Err(Error::input(format!(
            "line {}: column '{}' is missing (enable imputation to fill)",
            lines[missing[0]],
            spec.name()
        )));
    }
    match spec {
        AttributeSpec::Numeric { name } => {
            let mut vals = Vec::with_capacity(cells.len());
            for (i, c) in cells.iter().enumerate() {
                vals.push(if is_missing(c) { f64::NAN } else { parse_f64(c, name, lines[i])? });
            }
            if !missing.is_empty() {
                let present: Vec<f64> = vals.iter().copied().filter(|v| !v.is_nan()).collect();
                if present.is_empty() {
                    return Err(Error::input(format!("column '{name}' has no values to impute from")));
                }
                let fill = crate::stats::median(&present);
                for &i in &missing {
                    vals[i] = fill;
                }
            }
            Ok(AttributeValues::Numeric(vals))
        }
        AttributeSpec::Categorical { name, levels } => {
            let mut vals: Vec<String> = cells.into_iter().map(|c| c.trim().to_string()).collect();
            if !missing.is_empty() {
                let mut counts: HashMap<&str, usize> = HashMap::new();
                for (i, v) in vals.iter().enumerate() {
                    if !missing.contains(&i) {
                        *counts.entry(v.as_str()).or_default() += 1;
                    }
                }
                // Mode; ties go to the earlier declared level.
                let count = |l: &String| counts.get(l.as_str()).copied().unwrap_or(0);
                let best = levels.iter().map(count).max().unwrap_or(0);
                let fill = levels
                    .iter()
                    .find(|l| count(l) == best)
                    .cloned()
                    .ok_or_else(|| Error::input(format!("column '{name}' has no levels")))?;
                for &i in &missing {
                    vals[i] = fill.clone();
                }
            }
            if let Some((i, v)) = vals.iter().enumerate().find(|(_, v)| !levels.contains(v)) {
                return Err(Error::input(format!(
                    "line {}: column '{name}' has undeclared level '{v}'",
                    lines[i]
                )));
            }
            Ok(AttributeValues::Categorical(vals))
        }
    }
}

/// One-hot encoder: numeric attributes pass through, each categorical gets
/// one indicator per non-reference level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    specs: Vec<AttributeSpec>,
}

impl Encoder {
    pub fn new(specs: Vec<AttributeSpec>) -> Self {
        Encoder { specs }
    }

    pub fn specs(&self) -> &[AttributeSpec] {
        &self.specs
    }

    pub fn output_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for s in &self.specs {
            match s {
                AttributeSpec::Numeric { name } => out.push(name.clone()),
                AttributeSpec::Categorical { name, levels } => out.extend(
                    levels.iter().skip(1).map(|l| crate::table::Indicator::column_name(name, l)),
                ),
            }
        }
        out
    }

    pub fn encode(&self, values: &[AttributeValues]) -> Result<Vec<Column>> {
        if values.len() != self.specs.len() {
            return Err(Error::input(format!(
                "encoder expects {} attributes, got {}",
                self.specs.len(),
                values.len()
            )));
        }
        let mut out = Vec::new();
        for (spec, vals) in self.specs.iter().zip(values) {
            match (spec, vals) {
                (AttributeSpec::Numeric { name }, AttributeValues::Numeric(v)) => {
                    out.push(Column::numeric(name.clone(), v.clone()));
                }
                (AttributeSpec::Categorical { name, levels }, AttributeValues::Categorical(v)) => {
                    if let Some(bad) = v.iter().find(|x| !levels.contains(x)) {
                        return Err(Error::input(format!("column '{name}': unseen level '{bad}'")));
                    }
                    for level in levels.iter().skip(1) {
                        let ind = v.iter().map(|x| if x == level { 1.0 } else { 0.0 }).collect();
                        out.push(Column::indicator(name, level, ind));
                    }
                }
                _ => {
                    return Err(Error::input(format!(
                        "attribute '{}' does not match its declared kind",
                        spec.name()
                    )))
                }
            }
        }
        Ok(out)
    }
}

pub fn load_events(path: &Path) -> Result<EventCatalog> {
    events_from_reader(open(path)?)
}

/// Events CSV: `id,lat,lon,time,size[,flag columns...]`; flags are 0/1.
pub fn events_from_reader<R: Read>(r: R) -> Result<EventCatalog> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    let fixed = ["id", "lat", "lon", "time", "size"];
    let idx: Vec<usize> = fixed
        .iter()
        .map(|n| {
            header
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| Error::input(format!("events: missing column '{n}'")))
        })
        .collect::<Result<_>>()?;
    let flag_cols: Vec<usize> = (0..header.len()).filter(|j| !idx.contains(j)).collect();
    let mut events = Vec::new();
    for (row, rec) in rd.records().enumerate() {
        let rec = rec?;
        let line = row + 2;
        let cell = |j: usize| rec.get(j).unwrap_or_default();
        let id: i64 = cell(idx[0])
            .parse()
            .map_err(|_| Error::input(format!("events line {line}: id '{}' is not an integer", cell(idx[0]))))?;
        let lat = parse_f64(cell(idx[1]), "lat", line)?;
        let lon = parse_f64(cell(idx[2]), "lon", line)?;
        let location = GeoPoint::new(lat, lon).map_err(|e| Error::input(format!("events line {line}: {e}")))?;
        let flags = flag_cols
            .iter()
            .map(|&j| match cell(j) {
                "1" | "true" | "TRUE" => Ok(true),
                "0" | "false" | "FALSE" => Ok(false),
                other => Err(Error::input(format!(
                    "events line {line}: flag '{}' must be 0/1, got '{other}'",
                    header[j]
                ))),
            })
            .collect::<Result<_>>()?;
        events.push(Event {
            id,
            location,
            time: parse_f64(cell(idx[3]), "time", line)?,
            size: parse_f64(cell(idx[4]), "size", line)?,
            flags,
        });
    }
    EventCatalog::new(flag_cols.iter().map(|&j| header[j].clone()).collect(), events)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainSize {
    Fraction(f64),
    Count(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: TrainSize,
    pub seed: u64,
}

fn fnv1a(s: &str) -> u64 {
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Random train/test partition. The assignment depends only on the row ids
/// and the seed, not on row order; both parts keep the input row order.
pub fn split(table: &FeatureTable, spec: &SplitSpec) -> Result<(FeatureTable, FeatureTable)> {
    let n = table.n_rows();
    let n_train = match spec.train {
        TrainSize::Count(c) => c,
        TrainSize::Fraction(f) => {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::config(format!("train fraction {f} outside [0, 1]")));
            }
            (f * n as f64).round() as usize
        }
    };
    if n_train > n {
        return Err(Error::config(format!("train size {n_train} exceeds {n} rows")));
    }
    let ids = table.ids();
    let mut order: Vec<usize> = (0..n).collect();
    let keys: Vec<u64> = ids
        .iter()
        .map(|id| derive_seed(spec.seed, &[seed::TAG_SPLIT, fnv1a(id)]))
        .collect();
    order.sort_by(|&a, &b| keys[a].cmp(&keys[b]).then_with(|| ids[a].cmp(&ids[b])));
    let mut in_train = vec![false; n];
    for &r in &order[..n_train] {
        in_train[r] = true;
    }
    let train: Vec<usize> = (0..n).filter(|&r| in_train[r]).collect();
    let test: Vec<usize> = (0..n).filter(|&r| !in_train[r]).collect();
    Ok((table.select_rows(&train), table.select_rows(&test)))
}

/// Assemble the modeling table from observations plus extra feature columns
/// (typically proximity features). Columns: extras first, then encoded
/// attributes.
pub fn assemble(obs: &Observations, extra: Vec<Column>) -> Result<FeatureTable> {
    let mut cols = extra;
    cols.extend(obs.encoder().encode(&obs.attributes)?);
    let table = FeatureTable::new(obs.ids.clone(), cols)?;
    match &obs.outcome {
        Some((name, y)) => table.with_outcome(name.clone(), y.clone()),
        None => Ok(table),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaz() -> Gazetteer {
        Gazetteer::from_reader("zip,lat,lon\n92101,32.7,-117.2\n501,40.8,-73.0\n".as_bytes()).unwrap()
    }

    #[test]
    fn zips_are_zero_padded() {
        let g = gaz();
        assert!(g.lookup("00501").is_some());
        assert!(g.lookup("501").is_some());
        assert!(g.lookup("99999").is_none());
    }

    #[test]
    fn explicit_coordinates_skip_gazetteer() {
        let csv = "id,lat,lon,zip,age\n1,10.0,20.0,99999,30\n";
        let obs = observations_from_reader(csv.as_bytes(), &ObservationSchema::default(), Some(&gaz())).unwrap();
        assert_eq!(obs.points[0], GeoPoint::new(10.0, 20.0).unwrap());
    }

    #[test]
    fn zip_resolves_to_centroid() {
        let csv = "id,zip,age\n1,92101,30\n";
        let obs = observations_from_reader(csv.as_bytes(), &ObservationSchema::default(), Some(&gaz())).unwrap();
        assert_eq!(obs.points[0], GeoPoint::new(32.7, -117.2).unwrap());
    }

    #[test]
    fn unknown_zip_strict_and_lenient() {
        let csv = "id,zip,age\n1,92101,30\n2,12345,40\n";
        let err = observations_from_reader(csv.as_bytes(), &ObservationSchema::default(), Some(&gaz())).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("12345") && msg.contains("line 3"), "{msg}");
        let lenient = ObservationSchema {
            strict: false,
            ..Default::default()
        };
        let obs = observations_from_reader(csv.as_bytes(), &lenient, Some(&gaz())).unwrap();
        assert_eq!(obs.len(), 1);
        assert_eq!(obs.row_errors.len(), 1);
        assert_eq!(obs.row_errors[0].line, 3);
    }

    #[test]
    fn malformed_number_names_row() {
        let csv = "id,lat,lon,age\n1,10.0,20.0,30\n2,10.0,2x,30\n";
        let err = observations_from_reader(csv.as_bytes(), &ObservationSchema::default(), None).unwrap_err();
        assert!(err.to_string().contains("line 3"));
    }

    #[test]
    fn encode_drops_reference_level() {
        let enc = Encoder::new(vec![
            AttributeSpec::Categorical {
                name: "party".into(),
                levels: vec!["D".into(), "I".into(), "R".into()],
            },
            AttributeSpec::Numeric { name: "age".into() },
        ]);
        let cols = enc
            .encode(&[
                AttributeValues::Categorical(vec!["R".into()]),
                AttributeValues::Numeric(vec![42.0]),
            ])
            .unwrap();
        assert_eq!(cols.len(), 3);
        assert_eq!(cols[0].name, "party[I]");
        assert_eq!(cols[0].values, vec![0.0]);
        assert_eq!(cols[1].name, "party[R]");
        assert_eq!(cols[1].values, vec![1.0]);
        assert_eq!(cols[2].values, vec![42.0]);
        let err = enc
            .encode(&[
                AttributeValues::Categorical(vec!["G".into()]),
                AttributeValues::Numeric(vec![42.0]),
            ])
            .unwrap_err();
        assert!(err.to_string().contains("party") && err.to_string().contains("'G'"));
    }

    #[test]
    fn encode_counts_indicator_columns() {
        let cat = |name: &str, k: usize| AttributeSpec::Categorical {
            name: name.into(),
            levels: (0..k).map(|i| format!("l{i}")).collect(),
        };
        let enc = Encoder::new(vec![cat("a", 3), cat("b", 2), cat("c", 5)]);
        assert_eq!(enc.output_names().len(), 7);
    }

    #[test]
    fn missing_values_rejected_or_imputed() {
        let csv = "id,lat,lon,age,party\n1,0,0,30,D\n2,0,0,,R\n3,0,0,50,R\n4,0,0,40,\n";
        assert!(observations_from_reader(csv.as_bytes(), &ObservationSchema::default(), None).is_err());
        let schema = ObservationSchema {
            impute: true,
            ..Default::default()
        };
        let obs = observations_from_reader(csv.as_bytes(), &schema, None).unwrap();
        assert_eq!(obs.attributes[0], AttributeValues::Numeric(vec![30.0, 40.0, 50.0, 40.0]));
        assert_eq!(
            obs.attributes[1],
            AttributeValues::Categorical(vec!["D".into(), "R".into(), "R".into(), "R".into()])
        );
    }

    fn numbered(n: usize) -> FeatureTable {
        FeatureTable::from_columns(vec![Column::numeric("x", (0..n).map(|i| i as f64).collect())]).unwrap()
    }

    #[test]
    fn split_is_deterministic_and_partitions() {
        let t = numbered(10);
        let spec = SplitSpec {
            train: TrainSize::Count(5),
            seed: 1,
        };
        let (a, b) = split(&t, &spec).unwrap();
        let (c, d) = split(&t, &spec).unwrap();
        assert_eq!(a, c);
        assert_eq!(b, d);
        let mut all: Vec<String> = a.ids().iter().chain(b.ids()).cloned().collect();
        all.sort_by_key(|s| s.parse::<usize>().unwrap());
        assert_eq!(all, t.ids());
    }

    #[test]
    fn split_sizes_from_the_applications() {
        let (tr, te) = split(&numbered(45_700), &SplitSpec { train: TrainSize::Count(40_000), seed: 3 }).unwrap();
        assert_eq!((tr.n_rows(), te.n_rows()), (40_000, 5_700));
        let (tr, te) = split(&numbered(64_285), &SplitSpec { train: TrainSize::Count(55_000), seed: 3 }).unwrap();
        assert_eq!((tr.n_rows(), te.n_rows()), (55_000, 9_285));
        assert!(matches!(
            split(&numbered(3), &SplitSpec { train: TrainSize::Count(4), seed: 0 }),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn split_ignores_row_order() {
        let t = numbered(50);
        let rev: Vec<usize> = (0..50).rev().collect();
        let spec = SplitSpec { train: TrainSize::Fraction(0.5), seed: 9 };
        let (a, _) = split(&t, &spec).unwrap();
        let (b, _) = split(&t.select_rows(&rev), &spec).unwrap();
        let mut ia = a.ids().to_vec();
        let mut ib = b.ids().to_vec();
        ia.sort();
        ib.sort();
        assert_eq!(ia, ib);
    }

    #[test]
    fn events_csv() {
        let csv = "id,lat,lon,time,size,school\n2,30,-100,1.5,4,1\n1,31,-101,2.5,6,0\n";
        let cat = events_from_reader(csv.as_bytes()).unwrap();
        assert_eq!(cat.flag_names(), ["school".to_string()]);
        assert_eq!(cat.events()[0].id, 1);
        assert_eq!(cat.events()[1].flags, vec![true]);
        assert!(events_from_reader("id,lat,lon,time,size\n1,0,0,1,1\n1,0,0,1,1\n".as_bytes()).is_err());
    }
}
