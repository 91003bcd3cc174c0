use std::io::{Read, Write};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::address::{address_features, StreetVocabulary};
use super::schema::{FeatureName, FeatureSchema};
use super::spatial::{SpatialFeatures, SpatialReference};
use super::standardize::Standardizer;
use super::temporal::temporal_features;
use crate::clustering::{nearest_center_distance, squared_distance, StackedCenters};
use crate::error::{Error, Result};
use crate::ingest::CrimeRecord;
use crate::labels::ClassLabel;

/// Named numeric columns over records, with the class index of each row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    schema: FeatureSchema,
    values: Array2<f64>,
    labels: Vec<usize>,
    class_count: usize,
    standardization: Option<Standardizer>,
}

impl FeatureMatrix {
    pub fn new(
        schema: FeatureSchema,
        values: Array2<f64>,
        labels: Vec<usize>,
        class_count: usize,
    ) -> Result<Self> {
        if values.ncols() != schema.len() {
            return Err(Error::Schema(format!(
                "matrix has {} columns but the schema names {}",
                values.ncols(),
                schema.len()
            )));
        }
        if values.nrows() != labels.len() {
            return Err(Error::Schema(format!(
                "{} rows but {} labels",
                values.nrows(),
                labels.len()
            )));
        }
        if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= class_count) {
            return Err(Error::LabelOutOfRange {
                row,
                label,
                classes: class_count,
            });
        }
        if let Some(((r, c), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Schema(format!(
                "non-finite value {v} at row {r}, column {}",
                schema.names()[c]
            )));
        }
        Ok(Self {
            schema,
            values,
            labels,
            class_count,
            standardization: None,
        })
    }

    pub(crate) fn with_standardization(mut self, s: Standardizer) -> Self {
        self.standardization = Some(s);
        self
    }

    /// Same rows under a different class count; labels must stay in range.
    pub fn with_class_count(self, class_count: usize) -> Result<Self> {
        let standardization = self.standardization;
        let mut out = Self::new(self.schema, self.values, self.labels, class_count)?;
        out.standardization = standardization;
        Ok(out)
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn standardization(&self) -> Option<&Standardizer> {
        self.standardization.as_ref()
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, i: usize) -> ndarray::ArrayView1<'_, f64> {
        self.values.row(i)
    }

    /// Rows `indices` (repeats allowed), keeping schema and class count.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let values = self.values.select(ndarray::Axis(0), indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Self {
            schema: self.schema.clone(),
            values,
            labels,
            class_count: self.class_count,
            standardization: self.standardization.clone(),
        }
    }

    /// CSV with the schema names as header and a trailing `label` column.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = self
            .schema
            .names()
            .iter()
            .map(|n| n.as_str().into_owned())
            .collect();
        header.push("label".into());
        wtr.write_record(&header)
            .map_err(|e| Error::csv("<output>", e))?;
        for (row, label) in self.values.rows().into_iter().zip(&self.labels) {
            let mut fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            fields.push(label.to_string());
            wtr.write_record(&fields)
                .map_err(|e| Error::csv("<output>", e))?;
        }
        wtr.flush().map_err(|e| Error::io("<output>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, class_count: usize) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let header = rdr.headers().map_err(|e| Error::csv("<input>", e))?.clone();
        let mut names: Vec<&str> = header.iter().collect();
        if names.pop() != Some("label") {
            return Err(Error::Schema("feature CSV must end with a label column".into()));
        }
        let schema = FeatureSchema::new(
            names
                .iter()
                .map(|n| n.parse())
                .collect::<Result<Vec<FeatureName>>>()?,
        )?;
        let width = schema.len();
        let mut flat = Vec::new();
        let mut labels = Vec::new();
        for (i, row) in rdr.records().enumerate() {
            let row = row.map_err(|e| Error::csv("<input>", e))?;
            let parse = |text: &str| {
                text.parse::<f64>().map_err(|_| {
                    Error::Schema(format!("row {}: cannot parse {text:?} as a number", i + 1))
                })
            };
            for cell in row.iter().take(width) {
                flat.push(parse(cell)?);
            }
            let label = row
                .get(width)
                .and_then(|t| t.parse::<usize>().ok())
                .ok_or_else(|| Error::Schema(format!("row {}: bad label", i + 1)))?;
            labels.push(label);
        }
        let values = Array2::from_shape_vec((labels.len(), width), flat)
            .map_err(|e| Error::Schema(e.to_string()))?;
        Self::new(schema, values, labels, class_count)
    }
}

/// Builds one row per record in schema order.
///
/// Street codes need a fitted `vocabulary`; cluster-distance columns need `centers`,
/// measured on raw coordinates.
pub fn build_feature_matrix(
    records: &[CrimeRecord],
    schema: &FeatureSchema,
    reference: &SpatialReference,
    vocabulary: Option<&StreetVocabulary>,
    centers: Option<&StackedCenters>,
) -> Result<FeatureMatrix> {
    let names = schema.names();
    let flattened = centers.map(StackedCenters::flattened);
    if names.iter().any(FeatureName::is_cluster_distance) {
        let centers = flattened.as_deref().ok_or_else(|| {
            Error::Config("schema has cluster-distance features but no centers were given".into())
        })?;
        if centers.is_empty() {
            return Err(Error::Config("cluster-distance features need at least one center".into()));
        }
        if let Some(FeatureName::CenterDistance(i)) = names
            .iter()
            .find(|n| matches!(n, FeatureName::CenterDistance(i) if *i as usize >= centers.len()))
        {
            return Err(Error::Config(format!(
                "CenterDistance{i} requested but only {} centers exist",
                centers.len()
            )));
        }
    }
    let needs_vocab = names
        .iter()
        .any(|n| matches!(n, FeatureName::Street1 | FeatureName::Street2));
    if needs_vocab && vocabulary.is_none() {
        return Err(Error::State(
            "street vocabulary must be fitted on training records before transforming".into(),
        ));
    }
    if let Some(n) = names.iter().find(|n| matches!(n, FeatureName::Component(_))) {
        return Err(Error::Config(format!(
            "{n} is produced by PCA, not by record featurization"
        )));
    }
    let empty_vocab = StreetVocabulary::default();
    let vocabulary = vocabulary.unwrap_or(&empty_vocab);

    let want_temporal = names.iter().any(FeatureName::is_temporal);
    let want_spatial = names.iter().any(FeatureName::is_spatial);
    let want_address = names.iter().any(FeatureName::is_address);

    let rows: Vec<Vec<f64>> = records
        .par_iter()
        .map(|r| {
            let temporal = want_temporal.then(|| temporal_features(r));
            let spatial = want_spatial.then(|| SpatialFeatures::new(r.x(), r.y(), reference));
            let address = want_address.then(|| address_features(r, vocabulary));
            names
                .iter()
                .map(|&name| match name {
                    FeatureName::NearestClusterDistance => {
                        nearest_center_distance(&r.point(), flattened.as_deref().unwrap())
                            .expect("centers checked above")
                    }
                    FeatureName::CenterDistance(i) => {
                        squared_distance(&r.point(), &flattened.as_deref().unwrap()[i as usize])
                            .sqrt()
                    }
                    n if n.is_temporal() => temporal.unwrap().value(n).unwrap(),
                    n if n.is_spatial() => spatial.unwrap().value(n).unwrap(),
                    n => address.unwrap().value(n).unwrap(),
                })
                .collect()
        })
        .collect();

    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let values = Array2::from_shape_vec((records.len(), names.len()), flat)
        .expect("rows have schema width");
    let labels = records.iter().map(|r| r.label().index()).collect();
    FeatureMatrix::new(schema.clone(), values, labels, ClassLabel::COUNT)
}

pub const FEATURE_STATE_VERSION: u32 = 1;

/// Everything fitted on training records that test-time featurization reuses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureState {
    pub format_version: u32,
    pub schema: FeatureSchema,
    pub reference: SpatialReference,
    pub vocabulary: StreetVocabulary,
    pub standardization: Option<Standardizer>,
}

impl FeatureState {
    pub fn fit(train: &[CrimeRecord], schema: FeatureSchema) -> Result<Self> {
        Ok(Self {
            format_version: FEATURE_STATE_VERSION,
            schema,
            reference: SpatialReference::fit(train)?,
            vocabulary: StreetVocabulary::fit(train),
            standardization: None,
        })
    }

    pub fn transform(
        &self,
        records: &[CrimeRecord],
        centers: Option<&StackedCenters>,
    ) -> Result<FeatureMatrix> {
        let raw = build_feature_matrix(
            records,
            &self.schema,
            &self.reference,
            Some(&self.vocabulary),
            centers,
        )?;
        match &self.standardization {
            Some(s) => s.transform(&raw),
            None => Ok(raw),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut state: Self = serde_json::from_str(text)?;
        if state.format_version != FEATURE_STATE_VERSION {
            return Err(Error::FormatVersion {
                found: state.format_version,
                expected: FEATURE_STATE_VERSION,
            });
        }
        state.vocabulary = state.vocabulary.reindexed();
        Ok(state)
    }
}
