//! Column schemas: names, kinds, and roles for tabular inputs.

use std::fmt;
use std::path::Path;

use crate::error::{CoreError, Result};

/// How a column's raw text is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Boolean,
    /// Parsed as a datetime; encodes to hour-of-day and day-of-week columns.
    Timestamp,
}

/// What a column is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnRole {
    Feature,
    Target,
    /// Present in the file but never parsed or encoded.
    Ignored,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    pub role: ColumnRole,
}

impl ColumnSpec {
    pub fn new(name: &str, kind: ColumnKind, role: ColumnRole) -> Self {
        ColumnSpec {
            name: name.to_string(),
            kind,
            role,
        }
    }
}

/// An ordered list of column specs with exactly one target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSchema {
    columns: Vec<ColumnSpec>,
}

impl FeatureSchema {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for col in &columns {
            if col.name.trim().is_empty() {
                return Err(CoreError::InvalidSchema("empty column name".into()));
            }
            if !seen.insert(col.name.as_str()) {
                return Err(CoreError::InvalidSchema(format!(
                    "duplicate column name '{}'",
                    col.name
                )));
            }
        }
        let targets: Vec<&ColumnSpec> = columns
            .iter()
            .filter(|c| c.role == ColumnRole::Target)
            .collect();
        match targets.len() {
            0 => {
                return Err(CoreError::InvalidSchema(
                    "schema declares no target column".into(),
                ))
            }
            1 => {}
            n => {
                return Err(CoreError::InvalidSchema(format!(
                    "schema declares {n} target columns; exactly one is required"
                )))
            }
        }
        Ok(FeatureSchema { columns })
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn target(&self) -> &ColumnSpec {
        self.columns
            .iter()
            .find(|c| c.role == ColumnRole::Target)
            .expect("validated at construction")
    }

    /// Feature-role columns in schema order.
    pub fn feature_columns(&self) -> impl Iterator<Item = &ColumnSpec> {
        self.columns.iter().filter(|c| c.role == ColumnRole::Feature)
    }

    pub fn column(&self, name: &str) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Schema for the subset of feature columns in `keep`, preserving order
    /// and the target column. Used when a model was trained on a projection.
    pub fn restrict_features(&self, keep: &[String]) -> Result<FeatureSchema> {
        for name in keep {
            match self.column(name) {
                Some(c) if c.role == ColumnRole::Feature => {}
                _ => return Err(CoreError::UnknownFeature(name.clone())),
            }
        }
        let columns = self
            .columns
            .iter()
            .filter(|c| {
                c.role == ColumnRole::Target
                    || (c.role == ColumnRole::Feature && keep.contains(&c.name))
            })
            .cloned()
            .collect();
        FeatureSchema::new(columns)
    }

    /// Parses the `name,kind,role` line format. Blank lines and `#` comments
    /// are skipped. Names may contain commas only if they are not in the last
    /// position; we therefore split from the right.
    pub fn parse(text: &str) -> Result<FeatureSchema> {
        let mut columns = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.rsplitn(3, ',');
            let role_s = parts.next().map(str::trim);
            let kind_s = parts.next().map(str::trim);
            let name = parts.next().map(str::trim);
            let (Some(name), Some(kind_s), Some(role_s)) = (name, kind_s, role_s) else {
                return Err(CoreError::InvalidSchema(format!(
                    "line {}: expected 'name,kind,role'",
                    lineno + 1
                )));
            };
            let kind = match kind_s.to_ascii_lowercase().as_str() {
                "numeric" => ColumnKind::Numeric,
                "categorical" => ColumnKind::Categorical,
                "boolean" | "bool" => ColumnKind::Boolean,
                "timestamp" => ColumnKind::Timestamp,
                other => {
                    return Err(CoreError::InvalidSchema(format!(
                        "line {}: unknown kind '{}'",
                        lineno + 1,
                        other
                    )))
                }
            };
            let role = match role_s.to_ascii_lowercase().as_str() {
                "feature" => ColumnRole::Feature,
                "target" => ColumnRole::Target,
                "ignored" | "ignore" => ColumnRole::Ignored,
                other => {
                    return Err(CoreError::InvalidSchema(format!(
                        "line {}: unknown role '{}'",
                        lineno + 1,
                        other
                    )))
                }
            };
            columns.push(ColumnSpec::new(name, kind, role));
        }
        FeatureSchema::new(columns)
    }

    pub fn load(path: &Path) -> Result<FeatureSchema> {
        let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
        FeatureSchema::parse(&text)
    }

    /// Renders the schema in the same `name,kind,role` line format that
    /// [`FeatureSchema::parse`] reads.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.columns {
            out.push_str(&format!("{},{},{}\n", c.name, c.kind, c.role));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| CoreError::io(path, e))
    }

    /// Default schema for the public US road-accident export this toolkit
    /// targets: 49 columns with `Severity` as the target.
    pub fn us_accidents() -> FeatureSchema {
        use ColumnKind::*;
        use ColumnRole::*;
        let cols = [
            ("ID", Categorical, Feature),
            ("Source", Categorical, Feature),
            ("TMC", Numeric, Feature),
            ("Severity", Numeric, Target),
            ("Start_Time", Timestamp, Feature),
            ("End_Time", Timestamp, Feature),
            ("Start_Lat", Numeric, Feature),
            ("Start_Lng", Numeric, Feature),
            ("End_Lat", Numeric, Feature),
            ("End_Lng", Numeric, Feature),
            ("Distance(mi)", Numeric, Feature),
            ("Description", Categorical, Feature),
            ("Number", Numeric, Feature),
            ("Street", Categorical, Feature),
            ("Side", Categorical, Feature),
            ("City", Categorical, Feature),
            ("County", Categorical, Feature),
            ("State", Categorical, Feature),
            ("Zipcode", Categorical, Feature),
            ("Country", Categorical, Feature),
            ("Timezone", Categorical, Feature),
            ("Airport_Code", Categorical, Feature),
            ("Weather_Timestamp", Timestamp, Feature),
            ("Temperature(F)", Numeric, Feature),
            ("Wind_Chill(F)", Numeric, Feature),
            ("Humidity(%)", Numeric, Feature),
            ("Pressure(in)", Numeric, Feature),
            ("Visibility(mi)", Numeric, Feature),
            ("Wind_Direction", Categorical, Feature),
            ("Wind_Speed(mph)", Numeric, Feature),
            ("Precipitation(in)", Numeric, Feature),
            ("Weather_Condition", Categorical, Feature),
            ("Amenity", Boolean, Feature),
            ("Bump", Boolean, Feature),
            ("Crossing", Boolean, Feature),
            ("Give_Way", Boolean, Feature),
            ("Junction", Boolean, Feature),
            ("No_Exit", Boolean, Feature),
            ("Railway", Boolean, Feature),
            ("Roundabout", Boolean, Feature),
            ("Station", Boolean, Feature),
            ("Stop", Boolean, Feature),
            ("Traffic_Calming", Boolean, Feature),
            ("Traffic_Signal", Boolean, Feature),
            ("Turning_Loop", Boolean, Feature),
            ("Sunrise_Sunset", Categorical, Feature),
            ("Civil_Twilight", Categorical, Feature),
            ("Nautical_Twilight", Categorical, Feature),
            ("Astronomical_Twilight", Categorical, Feature),
        ];
        let columns = cols
            .iter()
            .map(|(n, k, r)| ColumnSpec::new(n, *k, *r))
            .collect();
        FeatureSchema::new(columns).expect("static schema is valid")
    }
}

impl fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ColumnKind::Numeric => "numeric",
            ColumnKind::Categorical => "categorical",
            ColumnKind::Boolean => "boolean",
            ColumnKind::Timestamp => "timestamp",
        };
        f.write_str(s)
    }
}

impl fmt::Display for ColumnRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ColumnRole::Feature => "feature",
            ColumnRole::Target => "target",
            ColumnRole::Ignored => "ignored",
        };
        f.write_str(s)
    }
}
