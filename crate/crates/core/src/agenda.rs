//! The data agenda: feature descriptions, prediction class and downstream
//! model. Users fill it in by hand (YAML); the pipeline extends it with every
//! accepted feature.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dsl::OperatorKind;
use crate::table::{DType, Table};

#[derive(Debug, thiserror::Error)]
pub enum AgendaError {
    #[error("cannot read agenda {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid agenda: {0}")]
    Format(#[from] serde_yaml::Error),
    #[error("agenda is missing required fields: {}", .0.join(", "))]
    MissingFields(Vec<String>),
    #[error("agenda does not match the data: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgendaFeature {
    pub name: String,
    pub dtype: DType,
    #[serde(default)]
    pub description: String,
    /// Set for features added by the pipeline.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derived: Option<OperatorKind>,
    /// Categorical values, as a hint for the model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PredictionClass {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DataAgenda {
    #[serde(default)]
    pub dataset_description: String,
    #[serde(default)]
    pub prediction_class: PredictionClass,
    #[serde(default)]
    pub downstream_model: String,
    #[serde(default)]
    pub features: Vec<AgendaFeature>,
}

/// Domains longer than this are left out of skeletons.
const MAX_DOMAIN: usize = 25;

impl DataAgenda {
    /// Skeleton with inferred dtypes and empty descriptions. The target, if
    /// the table has one, becomes the prediction class.
    pub fn skeleton(table: &Table) -> Self {
        let features = table
            .metas()
            .iter()
            .filter(|m| Some(m.name.as_str()) != table.target())
            .map(|m| AgendaFeature {
                name: m.name.clone(),
                dtype: m.dtype,
                description: m.description.clone(),
                derived: None,
                domain: m.domain.clone().filter(|d| d.len() <= MAX_DOMAIN),
            })
            .collect();
        DataAgenda {
            prediction_class: PredictionClass {
                name: table.target().unwrap_or_default().to_string(),
                description: String::new(),
            },
            features,
            ..Default::default()
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AgendaError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| AgendaError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_yaml(&text)
    }

    pub fn from_yaml(text: &str) -> Result<Self, AgendaError> {
        Ok(serde_yaml::from_str(text)?)
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("agenda serializes")
    }

    /// Names of required fields left blank.
    pub fn missing_fields(&self) -> Vec<String> {
        let mut missing = Vec::new();
        if self.prediction_class.name.trim().is_empty() {
            missing.push("prediction_class.name".to_string());
        }
        if self.downstream_model.trim().is_empty() {
            missing.push("downstream_model".to_string());
        }
        missing
    }

    pub fn validate(&self) -> Result<(), AgendaError> {
        let missing = self.missing_fields();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(AgendaError::MissingFields(missing))
        }
    }

    pub fn target(&self) -> &str {
        &self.prediction_class.name
    }

    pub fn feature(&self, name: &str) -> Option<&AgendaFeature> {
        self.features.iter().find(|f| f.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }

    /// Brings the agenda in line with `table`: features the table lacks are
    /// removed, columns the agenda lacks are appended with their table
    /// metadata, and the order follows the table. Descriptions the user wrote
    /// are kept.
    pub fn aligned_with(&self, table: &Table) -> DataAgenda {
        let features = table
            .metas()
            .iter()
            .filter(|m| m.name != self.prediction_class.name)
            .map(|m| match self.feature(&m.name) {
                Some(f) => AgendaFeature { dtype: m.dtype, ..f.clone() },
                None => AgendaFeature {
                    name: m.name.clone(),
                    dtype: m.dtype,
                    description: m.description.clone(),
                    derived: match m.origin {
                        crate::table::Origin::Derived { operator, .. } => Some(operator),
                        crate::table::Origin::Original => None,
                    },
                    domain: None,
                },
            })
            .collect();
        DataAgenda {
            features,
            ..self.clone()
        }
    }

    /// Checks that the agenda lists exactly the table's non-target columns.
    pub fn check_consistent(&self, table: &Table) -> Result<(), AgendaError> {
        let table_names: Vec<&str> = table.names().filter(|n| *n != self.target()).collect();
        let agenda_names: Vec<&str> = self.names().collect();
        if table_names == agenda_names {
            Ok(())
        } else {
            Err(AgendaError::Inconsistent(format!(
                "table columns {table_names:?}, agenda features {agenda_names:?}"
            )))
        }
    }

    pub fn push(&mut self, name: impl Into<String>, dtype: DType, description: impl Into<String>, kind: OperatorKind) {
        self.features.push(AgendaFeature {
            name: name.into(),
            dtype,
            description: description.into(),
            derived: Some(kind),
            domain: None,
        });
    }

    pub fn remove(&mut self, names: &[String]) {
        self.features.retain(|f| !names.contains(&f.name));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::fixtures::table1;

    #[test]
    fn skeleton_lists_non_target_features() {
        let a = DataAgenda::skeleton(&table1());
        assert_eq!(a.features.len(), 6);
        assert_eq!(a.prediction_class.name, "Safe");
        assert_eq!(a.feature("Sex").unwrap().domain.as_deref(), Some(&["M".to_string(), "F".to_string()][..]));
        assert_eq!(a.missing_fields(), vec!["downstream_model".to_string()]);
    }

    #[test]
    fn yaml_round_trip() {
        let mut a = DataAgenda::skeleton(&table1());
        a.downstream_model = "Logistic regression".into();
        a.push("Bucketize_Age", DType::Numeric, "age group", OperatorKind::Unary);
        let back = DataAgenda::from_yaml(&a.to_yaml()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn missing_fields_named() {
        let a = DataAgenda::from_yaml("features: []\n").unwrap();
        match a.validate() {
            Err(AgendaError::MissingFields(f)) => {
                assert_eq!(f, vec!["prediction_class.name", "downstream_model"])
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn aligned_keeps_descriptions_and_follows_table() {
        let t = table1();
        let mut a = DataAgenda::skeleton(&t);
        a.features[1].description = "age of the policy holder".into();
        a.features.reverse();
        a.features.push(AgendaFeature {
            name: "Ghost".into(),
            dtype: DType::Text,
            description: String::new(),
            derived: None,
            domain: None,
        });
        let b = a.aligned_with(&t);
        assert!(b.check_consistent(&t).is_ok());
        assert_eq!(b.feature("Age").unwrap().description, "age of the policy holder");
        assert!(a.check_consistent(&t).is_err());
    }
}
