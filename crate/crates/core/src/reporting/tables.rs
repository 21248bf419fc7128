use super::format::{fixed3, sig3};
use super::{metric_columns, metric_label, Highlight, ReportError, ReportRow};
use crate::selection::Color;
use crate::validation::ExperimentSpec;

/// Output format of a rendered table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TableFormat {
    Markdown,
    Csv,
    Html,
}

impl TableFormat {
    pub fn extension(self) -> &'static str {
        match self {
            TableFormat::Markdown => "md",
            TableFormat::Csv => "csv",
            TableFormat::Html => "html",
        }
    }
}

fn mean_pm_std(mean: f64, std: f64, pm: &str) -> String {
    format!("{} {pm} {}", sig3(mean), sig3(std))
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn results_table(rows: &[ReportRow], pm: &str) -> Table {
    let metrics = metric_columns(rows);
    let with_r2 = rows.iter().any(|r| r.r2_test_mean.is_some());
    let mut header: Vec<String> = ["Exp. ID", "Model", "Preproc.", "Normal."].map(String::from).to_vec();
    for m in &metrics {
        let label = metric_label(m);
        let spread = if pm == "±" { "± σ" } else { "+/- std" };
        header.push(format!("{label} {spread} (train)"));
        header.push(format!("{label} {spread} (test)"));
    }
    header.extend(["LOR", "COS"].map(String::from));
    if with_r2 {
        header.push("R² (test)".to_string());
    }
    header.push("Status".to_string());

    let body = rows
        .iter()
        .map(|row| {
            let mut cells =
                vec![row.experiment_id.clone(), row.model.clone(), row.preprocessing.clone(), row.normalization.clone()];
            for m in &metrics {
                match row.metric(m) {
                    Some(s) => {
                        cells.push(mean_pm_std(s.train_mean, s.train_std, pm));
                        cells.push(mean_pm_std(s.test_mean, s.test_std, pm));
                    }
                    None => cells.extend(["n/a".to_string(), "n/a".to_string()]),
                }
            }
            cells.push(fixed3(row.lor));
            cells.push(fixed3(row.cos));
            if with_r2 {
                cells.push(fixed3(row.r2_test_mean));
            }
            cells.push(row.status_text());
            cells
        })
        .collect();
    Table { header, rows: body }
}

fn md_escape(cell: &str) -> String {
    cell.replace('|', "\\|")
}

fn md_emphasis(cell: &str, highlight: Highlight) -> String {
    let cell = md_escape(cell);
    match highlight {
        Highlight::None => cell,
        Highlight::BestLor => format!("**{cell}**"),
        Highlight::BestCos | Highlight::Both => format!("***{cell}***"),
    }
}

fn render_markdown(table: &Table, highlights: &[Highlight]) -> String {
    let mut out = String::new();
    let line = |cells: Vec<String>| format!("| {} |\n", cells.join(" | "));
    out.push_str(&line(table.header.iter().map(|h| md_escape(h)).collect()));
    out.push_str(&line(table.header.iter().map(|_| "---".to_string()).collect()));
    for (i, row) in table.rows.iter().enumerate() {
        let h = highlights.get(i).copied().unwrap_or_default();
        out.push_str(&line(row.iter().map(|c| md_emphasis(c, h)).collect()));
    }
    out
}

fn render_csv(table: &Table) -> String {
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    writer.write_record(&table.header).expect("in-memory write");
    for row in &table.rows {
        writer.write_record(row).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

fn html_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const HTML_STYLE: &str = "\
table { border-collapse: collapse; font-family: sans-serif; font-size: 0.9em; }
th, td { border: 1px solid #999; padding: 0.25em 0.6em; text-align: left; }
tr.status-red { background-color: #f4c7c3; }
tr.status-yellow { background-color: #fce8b2; }
tr.status-green { background-color: #b7e1cd; }
";

fn render_html(title: &str, table: &Table, row_classes: &[String], highlights: &[Highlight]) -> String {
    let mut out = String::new();
    out.push_str("<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n");
    out.push_str(&format!("<title>{}</title>\n<style>\n{HTML_STYLE}</style>\n</head>\n<body>\n", html_escape(title)));
    out.push_str("<table>\n<thead>\n<tr>");
    for h in &table.header {
        out.push_str(&format!("<th>{}</th>", html_escape(h)));
    }
    out.push_str("</tr>\n</thead>\n<tbody>\n");
    for (i, row) in table.rows.iter().enumerate() {
        let class = row_classes.get(i).map(String::as_str).unwrap_or("");
        if class.is_empty() {
            out.push_str("<tr>");
        } else {
            out.push_str(&format!("<tr class=\"{class}\">"));
        }
        let h = highlights.get(i).copied().unwrap_or_default();
        for cell in row {
            let cell = html_escape(cell);
            let cell = match h {
                Highlight::None => cell,
                Highlight::BestLor => format!("<strong>{cell}</strong>"),
                Highlight::BestCos | Highlight::Both => format!("<strong><em>{cell}</em></strong>"),
            };
            out.push_str(&format!("<td>{cell}</td>"));
        }
        out.push_str("</tr>\n");
    }
    out.push_str("</tbody>\n</table>\n</body>\n</html>\n");
    out
}

fn row_class(row: &ReportRow) -> String {
    let mut classes = Vec::new();
    if row.status.color != Color::NotApplicable {
        classes.push(format!("status-{}", row.status.color.as_str()));
    }
    if row.status.degenerate {
        classes.push("degenerate".to_string());
    }
    if row.highlight != Highlight::None {
        classes.push(row.highlight.as_str().replace('_', "-"));
    }
    classes.join(" ")
}

/// Renders the results table. CSV carries status and highlight as plain
/// columns; Markdown and HTML mark the best rows instead.
pub fn render_results_table(rows: &[ReportRow], format: TableFormat) -> Result<String, ReportError> {
    if rows.is_empty() && format != TableFormat::Csv {
        return Err(ReportError::EmptyReport("results table has no rows"));
    }
    let highlights: Vec<Highlight> = rows.iter().map(|r| r.highlight).collect();
    Ok(match format {
        TableFormat::Markdown => render_markdown(&results_table(rows, "±"), &highlights),
        TableFormat::Html => {
            let classes: Vec<String> = rows.iter().map(row_class).collect();
            render_html("Results", &results_table(rows, "±"), &classes, &highlights)
        }
        TableFormat::Csv => {
            let mut table = results_table(rows, "+/-");
            table.header.pop();
            table.header.extend(["color", "degenerate", "highlight"].map(String::from));
            for (cells, row) in table.rows.iter_mut().zip(rows) {
                cells.pop();
                cells.push(row.status.color.as_str().to_string());
                cells.push(row.status.degenerate.to_string());
                cells.push(row.highlight.as_str().to_string());
            }
            render_csv(&table)
        }
    })
}

fn plan_table(specs: &[ExperimentSpec]) -> Table {
    let header = ["Exp. ID", "Task", "Preproc.", "Normal.", "Instance", "Metrics", "Dataset", "Notes"].map(String::from).to_vec();
    let rows = specs
        .iter()
        .map(|s| {
            vec![
                s.experiment_id.clone(),
                s.task.label().to_string(),
                s.preprocessing_label(),
                s.normalization_label(),
                s.learner.instance_label(),
                s.metric_names.iter().map(|m| m.label()).collect::<Vec<_>>().join(", "),
                s.dataset_ref.clone(),
                s.notes.clone(),
            ]
        })
        .collect();
    Table { header, rows }
}

/// Renders the experiment plan, one row per experiment.
pub fn render_plan_table(specs: &[ExperimentSpec], format: TableFormat) -> Result<String, ReportError> {
    if specs.is_empty() {
        return Err(ReportError::EmptyReport("plan has no experiments"));
    }
    let table = plan_table(specs);
    Ok(match format {
        TableFormat::Markdown => render_markdown(&table, &[]),
        TableFormat::Csv => render_csv(&table),
        TableFormat::Html => render_html("Experiment plan", &table, &[], &[]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::aggregate;
    use crate::selection::RowStatus;
    use crate::TaskKind;

    fn row(id: &str, r2: Option<f64>, highlight: Highlight) -> ReportRow {
        ReportRow {
            experiment_id: id.into(),
            task: TaskKind::Regression,
            model: "Decision Tree".into(),
            preprocessing: "Raw".into(),
            normalization: "None".into(),
            metrics: vec![aggregate(&[1.0, 2.0], &[2.0, 3.0], "mae").unwrap()],
            lor: Some(-0.1),
            cos: None,
            r2_test_mean: r2,
            status: RowStatus::new(TaskKind::Regression, r2, None),
            highlight,
        }
    }

    #[test]
    fn markdown_marks_highlights() {
        let md = render_results_table(&[row("A", Some(0.9), Highlight::BestLor), row("B", Some(0.9), Highlight::Both)], TableFormat::Markdown)
            .unwrap();
        let lines: Vec<&str> = md.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("| Exp. ID | Model | Preproc. | Normal. | MAE ± σ (train) | MAE ± σ (test) | LOR | COS | R² (test) | Status |"));
        assert!(lines[2].starts_with("| **A** | **Decision Tree** |"));
        assert!(lines[3].starts_with("| ***B*** |"));
        assert!(lines[2].contains("**1.50 ± 0.707**"));
        assert!(lines[2].contains("**n/a**"));
    }

    #[test]
    fn html_status_classes() {
        let html =
            render_results_table(&[row("R", Some(-1.0), Highlight::None), row("G", Some(0.9), Highlight::None)], TableFormat::Html).unwrap();
        assert!(html.contains("<tr class=\"status-red\">"));
        assert!(html.contains("<tr class=\"status-green\">"));
    }

    #[test]
    fn empty_tables() {
        assert!(matches!(render_results_table(&[], TableFormat::Markdown), Err(ReportError::EmptyReport(_))));
        assert!(matches!(render_results_table(&[], TableFormat::Html), Err(ReportError::EmptyReport(_))));
        let csv = render_results_table(&[], TableFormat::Csv).unwrap();
        assert_eq!(csv.lines().count(), 1);
        assert!(matches!(render_plan_table(&[], TableFormat::Csv), Err(ReportError::EmptyReport(_))));
    }

    #[test]
    fn csv_plain_columns() {
        let csv = render_results_table(&[row("A", None, Highlight::BestLor)], TableFormat::Csv).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].ends_with("LOR,COS,color,degenerate,highlight"));
        assert_eq!(lines[1], "A,Decision Tree,Raw,None,1.50 +/- 0.707,2.50 +/- 0.707,-0.100,n/a,not_applicable,false,best_lor");
    }
}
