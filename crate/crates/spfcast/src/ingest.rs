//! Loading and validation of the three input tables: meter readings,
//! building records, and daily weather. Timestamps are naive local dates;
//! hourly readings carry the hour as `YYYY-MM-DDTHH`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Medium {
    GasVolume,
    HpElectricity,
    HouseholdElectricity,
}

impl Medium {
    pub fn as_str(self) -> &'static str {
        match self {
            Medium::GasVolume => "gas_volume",
            Medium::HpElectricity => "hp_electricity",
            Medium::HouseholdElectricity => "household_electricity",
        }
    }
}

impl FromStr for Medium {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "gas_volume" => Ok(Medium::GasVolume),
            "hp_electricity" => Ok(Medium::HpElectricity),
            "household_electricity" => Ok(Medium::HouseholdElectricity),
            other => Err(format!("unknown medium tag {other:?}")),
        }
    }
}

impl fmt::Display for Medium {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolution {
    Daily,
    Hourly,
}

impl Resolution {
    pub fn as_str(self) -> &'static str {
        match self {
            Resolution::Daily => "daily",
            Resolution::Hourly => "hourly",
        }
    }
}

impl FromStr for Resolution {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "daily" => Ok(Resolution::Daily),
            "hourly" => Ok(Resolution::Hourly),
            other => Err(format!("unknown resolution {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatingType {
    GasFurnace,
    HeatPumpAir,
    HeatPumpGround,
    Other,
}

impl HeatingType {
    pub fn as_str(self) -> &'static str {
        match self {
            HeatingType::GasFurnace => "gas_furnace",
            HeatingType::HeatPumpAir => "heat_pump_air",
            HeatingType::HeatPumpGround => "heat_pump_ground",
            HeatingType::Other => "other",
        }
    }

    pub fn is_heat_pump(self) -> bool {
        matches!(self, HeatingType::HeatPumpAir | HeatingType::HeatPumpGround)
    }
}

impl FromStr for HeatingType {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "gas_furnace" => Ok(HeatingType::GasFurnace),
            "heat_pump_air" => Ok(HeatingType::HeatPumpAir),
            "heat_pump_ground" => Ok(HeatingType::HeatPumpGround),
            "other" => Ok(HeatingType::Other),
            other => Err(format!("unknown heating type {other:?}")),
        }
    }
}

/// One meter's full reading history. Timestamps are strictly increasing;
/// daily readings sit at midnight.
#[derive(Debug, Clone, PartialEq)]
pub struct MeterSeries {
    pub meter_id: String,
    pub medium: Medium,
    pub resolution: Resolution,
    pub readings: Vec<(NaiveDateTime, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildingRecord {
    pub building_id: String,
    pub volume_m3: Option<f64>,
    pub heating_type: HeatingType,
    pub meter_ids: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeatherSeries {
    pub readings: Vec<(NaiveDate, f64)>,
}

/// Calendar-year aggregate of one series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnualValue {
    pub year: i32,
    pub total: f64,
    /// Share of the year's days with at least one reading.
    pub coverage: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub meters: BTreeMap<String, MeterSeries>,
    /// Sorted by building_id.
    pub buildings: Vec<BuildingRecord>,
    pub weather: WeatherSeries,
}

#[derive(Debug, Clone)]
pub struct DatasetPaths {
    pub meters: PathBuf,
    pub buildings: PathBuf,
    pub weather: PathBuf,
}

impl DatasetPaths {
    /// The conventional file names under one directory.
    pub fn in_dir(dir: &Path) -> Self {
        DatasetPaths {
            meters: dir.join("meters.csv"),
            buildings: dir.join("buildings.csv"),
            weather: dir.join("weather.csv"),
        }
    }
}

pub fn days_in_year(year: i32) -> u32 {
    NaiveDate::from_ymd_opt(year, 12, 31).expect("valid date").ordinal()
}

fn parse_timestamp(s: &str, resolution: Resolution) -> Option<NaiveDateTime> {
    match resolution {
        Resolution::Daily => NaiveDate::parse_from_str(s, "%Y-%m-%d")
            .ok()
            .and_then(|d| d.and_hms_opt(0, 0, 0)),
        Resolution::Hourly => {
            let (date, hour) = s.split_once('T')?;
            if hour.len() != 2 || !hour.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            let date = NaiveDate::parse_from_str(date, "%Y-%m-%d").ok()?;
            date.and_hms_opt(hour.parse().ok()?, 0, 0)
        }
    }
}

fn format_timestamp(ts: NaiveDateTime, resolution: Resolution) -> String {
    match resolution {
        Resolution::Daily => ts.date().format("%Y-%m-%d").to_string(),
        Resolution::Hourly => format!("{}T{:02}", ts.date().format("%Y-%m-%d"), ts.hour()),
    }
}

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn check_header(path: &Path, got: &csv::StringRecord, want: &[&str]) -> Result<()> {
    let got: Vec<&str> = got.iter().collect();
    if got != want {
        return Err(Error::csv_row(
            path,
            1,
            format!("expected header {}, got {}", want.join(","), got.join(",")),
        ));
    }
    Ok(())
}

fn record_line(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

/// Load meters.csv: `meter_id,medium,resolution,timestamp,value`.
pub fn load_meters(path: &Path) -> Result<BTreeMap<String, MeterSeries>> {
    let mut rdr = open_reader(path)?;
    let header = rdr
        .headers()
        .map_err(|e| Error::csv_row(path, 1, e.to_string()))?
        .clone();
    check_header(path, &header, &["meter_id", "medium", "resolution", "timestamp", "value"])?;

    let mut meters: BTreeMap<String, MeterSeries> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv_row(path, 0, e.to_string()))?;
        let line = record_line(&rec);
        if rec.len() != 5 {
            return Err(Error::csv_row(path, line, format!("expected 5 fields, got {}", rec.len())));
        }
        let meter_id = rec[0].to_string();
        if meter_id.is_empty() {
            return Err(Error::csv_row(path, line, "empty meter_id"));
        }
        let medium: Medium = rec[1].parse().map_err(|e| Error::csv_row(path, line, e))?;
        let resolution: Resolution = rec[2].parse().map_err(|e| Error::csv_row(path, line, e))?;
        let ts = parse_timestamp(&rec[3], resolution).ok_or_else(|| {
            Error::csv_row(
                path,
                line,
                format!("timestamp {:?} does not match {} resolution", &rec[3], resolution.as_str()),
            )
        })?;
        let value: f64 = rec[4]
            .parse()
            .map_err(|_| Error::csv_row(path, line, format!("bad value {:?}", &rec[4])))?;
        if !value.is_finite() || value < 0.0 {
            return Err(Error::csv_row(
                path,
                line,
                format!("meter {meter_id}: reading must be finite and non-negative, got {value}"),
            ));
        }

        let entry = meters.entry(meter_id.clone()).or_insert_with(|| MeterSeries {
            meter_id: meter_id.clone(),
            medium,
            resolution,
            readings: Vec::new(),
        });
        if entry.medium != medium || entry.resolution != resolution {
            return Err(Error::DuplicateMeter { meter_id });
        }
        if let Some(&(last, _)) = entry.readings.last() {
            if ts <= last {
                return Err(Error::csv_row(
                    path,
                    line,
                    format!("meter {meter_id}: timestamps must be strictly increasing"),
                ));
            }
        }
        entry.readings.push((ts, value));
    }
    Ok(meters)
}

/// Load buildings.csv: `building_id,volume_m3,heating_type,meter_ids`
/// with meter ids separated by `|`.
pub fn load_buildings(path: &Path) -> Result<Vec<BuildingRecord>> {
    let mut rdr = open_reader(path)?;
    let header = rdr
        .headers()
        .map_err(|e| Error::csv_row(path, 1, e.to_string()))?
        .clone();
    check_header(path, &header, &["building_id", "volume_m3", "heating_type", "meter_ids"])?;

    let mut out: Vec<BuildingRecord> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv_row(path, 0, e.to_string()))?;
        let line = record_line(&rec);
        if rec.len() != 4 {
            return Err(Error::csv_row(path, line, format!("expected 4 fields, got {}", rec.len())));
        }
        let building_id = rec[0].to_string();
        if building_id.is_empty() {
            return Err(Error::csv_row(path, line, "empty building_id"));
        }
        if !seen.insert(building_id.clone()) {
            return Err(Error::DuplicateBuilding { building_id });
        }
        let volume_m3 = if rec[1].is_empty() {
            None
        } else {
            let v: f64 = rec[1]
                .parse()
                .map_err(|_| Error::csv_row(path, line, format!("bad volume {:?}", &rec[1])))?;
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::csv_row(
                    path,
                    line,
                    format!("building {building_id}: volume must be positive, got {v}"),
                ));
            }
            Some(v)
        };
        let heating_type: HeatingType =
            rec[2].parse().map_err(|e| Error::csv_row(path, line, e))?;
        let meter_ids: Vec<String> = if rec[3].is_empty() {
            Vec::new()
        } else {
            rec[3].split('|').map(str::to_string).collect()
        };
        if meter_ids.iter().any(String::is_empty) {
            return Err(Error::csv_row(path, line, "empty meter id in meter_ids"));
        }
        out.push(BuildingRecord {
            building_id,
            volume_m3,
            heating_type,
            meter_ids,
        });
    }
    out.sort_by(|a, b| a.building_id.cmp(&b.building_id));
    Ok(out)
}

/// Load weather.csv: `date,mean_temp_c`, strictly increasing dates.
pub fn load_weather(path: &Path) -> Result<WeatherSeries> {
    let mut rdr = open_reader(path)?;
    let header = rdr
        .headers()
        .map_err(|e| Error::csv_row(path, 1, e.to_string()))?
        .clone();
    check_header(path, &header, &["date", "mean_temp_c"])?;

    let mut readings = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv_row(path, 0, e.to_string()))?;
        let line = record_line(&rec);
        if rec.len() != 2 {
            return Err(Error::csv_row(path, line, format!("expected 2 fields, got {}", rec.len())));
        }
        let date = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d")
            .map_err(|_| Error::csv_row(path, line, format!("bad date {:?}", &rec[0])))?;
        let temp: f64 = rec[1]
            .parse()
            .map_err(|_| Error::csv_row(path, line, format!("bad temperature {:?}", &rec[1])))?;
        if !temp.is_finite() {
            return Err(Error::csv_row(path, line, "temperature must be finite"));
        }
        if let Some(&(last, _)) = readings.last() {
            if date <= last {
                return Err(Error::csv_row(path, line, "dates must be strictly increasing"));
            }
        }
        readings.push((date, temp));
    }
    Ok(WeatherSeries { readings })
}

/// Load and cross-validate the three tables.
pub fn load_dataset(paths: &DatasetPaths) -> Result<Dataset> {
    let meters = load_meters(&paths.meters)?;
    let buildings = load_buildings(&paths.buildings)?;
    let weather = load_weather(&paths.weather)?;

    let mut owner: BTreeMap<&str, &str> = BTreeMap::new();
    for b in &buildings {
        let mut gas = 0usize;
        let mut hp = 0usize;
        for mid in &b.meter_ids {
            let series = meters.get(mid).ok_or_else(|| Error::DanglingMeter {
                building_id: b.building_id.clone(),
                meter_id: mid.clone(),
            })?;
            if let Some(first) = owner.insert(mid, &b.building_id) {
                return Err(Error::SharedMeter {
                    meter_id: mid.clone(),
                    first: first.to_string(),
                    second: b.building_id.clone(),
                });
            }
            match series.medium {
                Medium::GasVolume => gas += 1,
                Medium::HpElectricity => hp += 1,
                Medium::HouseholdElectricity => {}
            }
        }
        if gas > 1 {
            return Err(Error::ExtraMeter {
                building_id: b.building_id.clone(),
                medium: Medium::GasVolume.as_str().into(),
            });
        }
        if hp > 1 {
            return Err(Error::ExtraMeter {
                building_id: b.building_id.clone(),
                medium: Medium::HpElectricity.as_str().into(),
            });
        }
    }
    Ok(Dataset {
        meters,
        buildings,
        weather,
    })
}

/// Sum a series over one calendar year. Coverage is the share of the
/// year's days that carry at least one reading.
pub fn aggregate_annual(series: &MeterSeries, year: i32) -> AnnualValue {
    let mut total = 0.0;
    let mut days = 0u32;
    let mut last_day: Option<NaiveDate> = None;
    for &(ts, v) in &series.readings {
        if ts.year() != year {
            continue;
        }
        total += v;
        let day = ts.date();
        if last_day != Some(day) {
            days += 1;
            last_day = Some(day);
        }
    }
    AnnualValue {
        year,
        total,
        coverage: days as f64 / days_in_year(year) as f64,
    }
}

/// Keep entries whose coverage clears the threshold. The retention count
/// is logged so sparse years are visible in the run output.
pub fn filter_by_coverage<T>(
    values: Vec<(T, AnnualValue)>,
    min_coverage: f64,
) -> Vec<(T, AnnualValue)> {
    let total = values.len();
    let kept: Vec<_> = values
        .into_iter()
        .filter(|(_, v)| v.coverage >= min_coverage)
        .collect();
    log::debug!(
        "coverage filter (>= {min_coverage}): retained {} of {total}",
        kept.len()
    );
    kept
}

impl MeterSeries {
    /// Per-day totals within one year; hourly readings are summed to days.
    pub fn daily_totals(&self, year: i32) -> Vec<(NaiveDate, f64)> {
        let mut out: Vec<(NaiveDate, f64)> = Vec::new();
        for &(ts, v) in &self.readings {
            if ts.year() != year {
                continue;
            }
            let day = ts.date();
            match out.last_mut() {
                Some((d, acc)) if *d == day => *acc += v,
                _ => out.push((day, v)),
            }
        }
        out
    }
}

impl Dataset {
    /// Sorted distinct calendar years with at least one meter reading.
    pub fn years(&self) -> Vec<i32> {
        let mut years = std::collections::BTreeSet::new();
        for m in self.meters.values() {
            for &(ts, _) in &m.readings {
                years.insert(ts.year());
            }
        }
        years.into_iter().collect()
    }

    /// A building's meter of the given medium, if it has one.
    pub fn meter_of(&self, building: &BuildingRecord, medium: Medium) -> Option<&MeterSeries> {
        building
            .meter_ids
            .iter()
            .filter_map(|id| self.meters.get(id))
            .find(|m| m.medium == medium)
    }

    /// Annual aggregate of a building's meter of the given medium.
    pub fn building_annual(
        &self,
        building: &BuildingRecord,
        medium: Medium,
        year: i32,
    ) -> Option<AnnualValue> {
        self.meter_of(building, medium)
            .map(|m| aggregate_annual(m, year))
    }
}

fn create_file(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(std::io::BufWriter::new(file))
}

fn csv_fail(path: &Path, e: impl fmt::Display) -> Error {
    Error::Config(format!("writing {} failed: {e}", path.display()))
}

/// Write the dataset back out in the input schemas. Floats use the
/// shortest representation that reparses to the same value, so a write
/// followed by a load reproduces identical aggregates.
pub fn write_dataset(dataset: &Dataset, paths: &DatasetPaths) -> Result<()> {
    let mut w = csv::Writer::from_writer(create_file(&paths.meters)?);
    w.write_record(["meter_id", "medium", "resolution", "timestamp", "value"])
        .map_err(|e| csv_fail(&paths.meters, e))?;
    for m in dataset.meters.values() {
        for &(ts, v) in &m.readings {
            w.write_record([
                m.meter_id.as_str(),
                m.medium.as_str(),
                m.resolution.as_str(),
                &format_timestamp(ts, m.resolution),
                &v.to_string(),
            ])
            .map_err(|e| csv_fail(&paths.meters, e))?;
        }
    }
    w.flush().map_err(|e| csv_fail(&paths.meters, e))?;

    let mut w = csv::Writer::from_writer(create_file(&paths.buildings)?);
    w.write_record(["building_id", "volume_m3", "heating_type", "meter_ids"])
        .map_err(|e| csv_fail(&paths.buildings, e))?;
    for b in &dataset.buildings {
        let volume = b.volume_m3.map(|v| v.to_string()).unwrap_or_default();
        w.write_record([
            b.building_id.as_str(),
            &volume,
            b.heating_type.as_str(),
            &b.meter_ids.join("|"),
        ])
        .map_err(|e| csv_fail(&paths.buildings, e))?;
    }
    w.flush().map_err(|e| csv_fail(&paths.buildings, e))?;

    let mut w = csv::Writer::from_writer(create_file(&paths.weather)?);
    w.write_record(["date", "mean_temp_c"])
        .map_err(|e| csv_fail(&paths.weather, e))?;
    for &(date, temp) in &dataset.weather.readings {
        w.write_record([date.format("%Y-%m-%d").to_string(), temp.to_string()])
            .map_err(|e| csv_fail(&paths.weather, e))?;
    }
    w.flush().map_err(|e| csv_fail(&paths.weather, e))?;
    Ok(())
}
