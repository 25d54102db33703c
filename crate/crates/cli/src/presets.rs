//! The two built-in examples with their tabulated extremes and reference values.

use std::collections::BTreeMap;
use std::path::PathBuf;

use lgdelay::examples::{Tabulated, EXAMPLE_ONE, EXAMPLE_TWO, TABLE_ONE, TABLE_TWO};
use lgdelay::Coefficient;

use crate::config::{
    Analyses, ExprValue, HistoryConfig, Options, Reference, ReportedValue, RunConfig, RunSection,
    TableEntry,
};
use crate::error::CliError;

pub const PRESET_NAMES: [&str; 2] = ["example1", "example2"];

fn model(formulas: &[(Coefficient, &str); 11]) -> BTreeMap<String, ExprValue> {
    formulas
        .iter()
        .map(|(c, text)| (c.name().to_string(), ExprValue::Text((*text).to_string())))
        .collect()
}

fn table(rows: &[Tabulated]) -> BTreeMap<String, TableEntry> {
    rows.iter()
        .map(|r| {
            (
                r.coefficient.name().to_string(),
                TableEntry {
                    inf: r.inf,
                    sup: r.sup,
                },
            )
        })
        .collect()
}

fn reported(values: [(&str, f64, Option<u32>); 6]) -> BTreeMap<String, ReportedValue> {
    values
        .into_iter()
        .map(|(k, value, decimals)| (k.to_string(), ReportedValue { value, decimals }))
        .collect()
}

fn preset(
    name: &str,
    formulas: &[(Coefficient, &str); 11],
    rows: &[Tabulated],
    reference_values: [(&str, f64, Option<u32>); 6],
) -> RunConfig {
    RunConfig {
        name: Some(name.to_string()),
        model: model(formulas),
        history: HistoryConfig::constant(0.5, 0.5),
        run: RunSection {
            t0: 0.0,
            t_end: 200.0,
            h: 0.01,
            t_settle: 100.0,
        },
        analyses: Analyses::ALL,
        options: Options::default(),
        reference: Some(Reference {
            table: table(rows),
            reported: reported(reference_values),
        }),
        output_dir: PathBuf::from("out").join(name),
    }
}

pub fn example1() -> RunConfig {
    preset(
        "example1",
        &EXAMPLE_ONE,
        &TABLE_ONE,
        [
            ("alpha_inf", 2.4, Some(1)),
            ("beta_inf", 0.012, Some(3)),
            ("M1", 0.7085, Some(4)),
            ("m1", 0.0, None),
            ("M2", 0.6506, Some(4)),
            ("m2", 0.0829, Some(4)),
        ],
    )
}

pub fn example2() -> RunConfig {
    preset(
        "example2",
        &EXAMPLE_TWO,
        &TABLE_TWO,
        [
            ("alpha_inf", 7.25, Some(2)),
            ("beta_inf", 0.009, Some(3)),
            ("M1", 0.6226, Some(4)),
            ("m1", 0.5567, Some(4)),
            ("M2", 0.6403, Some(4)),
            ("m2", 0.0408, Some(4)),
        ],
    )
}

pub fn by_name(name: &str) -> Result<RunConfig, CliError> {
    match name {
        "example1" => Ok(example1()),
        "example2" => Ok(example2()),
        other => Err(CliError::Config {
            pointer: String::new(),
            message: format!("unknown preset `{other}`; expected one of {PRESET_NAMES:?}"),
        }),
    }
}
