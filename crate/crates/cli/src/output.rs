use std::fs;
use std::io;
use std::path::Path;

use crate::config::Resolved;

/// Report text plus named CSV files for one subcommand.
pub struct Output {
    pub name: String,
    pub config_echo: String,
    pub report: String,
    pub csvs: Vec<(String, String)>,
}

impl Output {
    pub fn new(name: &str, cfg: &Resolved) -> Self {
        let config_echo = toml::to_string_pretty(cfg).unwrap_or_else(|e| format!("# could not render config: {e}\n"));
        Output {
            name: name.to_string(),
            config_echo,
            report: String::new(),
            csvs: Vec::new(),
        }
    }

    pub fn csv(&mut self, file: &str, content: String) {
        self.csvs.push((file.to_string(), content));
    }

    pub fn render_report(&self) -> String {
        format!(
            "== {} ==\n\n-- resolved configuration --\n{}\n-- results --\n{}",
            self.name, self.config_echo, self.report
        )
    }

    pub fn write(&self, dir: &Path, csv: bool, report: bool) -> io::Result<Vec<String>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        if csv {
            for (file, content) in &self.csvs {
                fs::write(dir.join(file), content)?;
                written.push(file.clone());
            }
        }
        if report {
            let file = format!("{}_report.txt", self.name);
            fs::write(dir.join(&file), self.render_report())?;
            written.push(file);
        }
        Ok(written)
    }
}

/// Four decimals for human-readable reports.
pub fn f4(x: f64) -> String {
    format!("{x:.4}")
}

/// One LF-terminated CSV record; fields with commas or quotes are quoted.
pub fn csv_line<S: AsRef<str>>(fields: &[S]) -> String {
    let mut line = fields
        .iter()
        .map(|f| {
            let f = f.as_ref();
            if f.contains([',', '"', '\n']) {
                format!("\"{}\"", f.replace('"', "\"\""))
            } else {
                f.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join(",");
    line.push('\n');
    line
}
