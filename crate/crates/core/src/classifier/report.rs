use std::io::Write;

use super::SensitivityReport;

pub const SENSITIVITY_HEADER: [&str; 7] = [
    "register",
    "field",
    "source",
    "target",
    "sensitive",
    "classes",
    "rules_fired",
];

pub fn write_sensitivity_csv<W: Write>(report: &SensitivityReport, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SENSITIVITY_HEADER)?;
    let source = report.source.to_string();
    let target = report.target.to_string();
    for e in &report.entries {
        let classes: Vec<String> = e.classes.iter().map(|c| c.to_string()).collect();
        w.write_record([
            e.state.register.as_str(),
            e.state.field.as_deref().unwrap_or(""),
            &source,
            &target,
            if e.sensitive { "true" } else { "false" },
            &classes.join(";"),
            &e.rules_fired().join(";"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sensitivity_json<W: Write>(report: &SensitivityReport, out: W) -> serde_json::Result<()> {
    serde_json::to_writer_pretty(out, report)
}
