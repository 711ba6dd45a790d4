use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;
use serde_json::Value;

use silofair::sweep::fmt_f64;
use silofair::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

pub fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Prints `report` to stdout, or writes `<stem>.<ext>` under `out`.
pub fn emit<T: Serialize>(report: &T, format: Format, out: Option<&Path>, stem: &str) -> Result<Option<PathBuf>> {
    let value = serde_json::to_value(report).expect("reports serialize");
    let text = match format {
        Format::Json => serde_json::to_string_pretty(&value).expect("reports serialize") + "\n",
        Format::Csv => flat_csv(&value),
    };
    match out {
        None => {
            print(&text)?;
            Ok(None)
        }
        Some(dir) => {
            let name = format!("{stem}.{}", format.extension());
            let mut w = create(dir, &name)?;
            w.write_all(text.as_bytes())?;
            w.flush()?;
            Ok(Some(dir.join(name)))
        }
    }
}

/// Writes to stdout; a closed pipe downstream is not an error.
pub fn print(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

pub fn print_json(value: &Value) -> Result<()> {
    print(&(serde_json::to_string_pretty(value).expect("reports serialize") + "\n"))
}

/// `key,value` lines with dotted paths for nested fields.
pub fn flat_csv(value: &Value) -> String {
    let mut rows = Vec::new();
    flatten(value, String::new(), &mut rows);
    let mut text = String::from("key,value\n");
    for (k, v) in rows {
        text.push_str(&quote(&k));
        text.push(',');
        text.push_str(&quote(&v));
        text.push('\n');
    }
    text
}

fn flatten(value: &Value, prefix: String, rows: &mut Vec<(String, String)>) {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                flatten(v, join(k), rows);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(v, join(&i.to_string()), rows);
            }
        }
        Value::Null => rows.push((prefix, String::new())),
        Value::Bool(b) => rows.push((prefix, b.to_string())),
        Value::String(s) => rows.push((prefix, s.clone())),
        Value::Number(n) => {
            let text = if n.is_f64() { fmt_f64(n.as_f64().expect("f64")) } else { n.to_string() };
            rows.push((prefix, text));
        }
    }
}

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn flattens_nested_values() {
        let v = json!({"a": 0.5, "b": {"c": [1, 2]}, "name": "x,y"});
        assert_eq!(
            flat_csv(&v),
            "key,value\na,5.0000000000000000e-1\nb.c.0,1\nb.c.1,2\nname,\"x,y\"\n"
        );
    }
}
