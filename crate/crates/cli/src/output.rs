use std::io::{self, IsTerminal, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Data {
        path: PathBuf,
        source: profcct_core::Error,
    },
    #[error("{0}")]
    Analysis(#[from] profcct_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Serve(#[from] profcct_server::ServeError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// ANSI styling is used only on terminals and never when
/// `PROFCCT_NO_COLOR` is set.
pub fn color_enabled(stream_is_terminal: bool) -> bool {
    stream_is_terminal && std::env::var_os("PROFCCT_NO_COLOR").is_none()
}

pub fn report(e: &CliError) {
    let stderr = io::stderr();
    let prefix = if color_enabled(stderr.is_terminal()) {
        "\x1b[1;31merror\x1b[0m"
    } else {
        "error"
    };
    let _ = writeln!(stderr.lock(), "{prefix}: {e}");
}

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// or to stdout when no path is given.
pub fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    let Some(path) = path else {
        let mut out = io::stdout().lock();
        return out
            .write_all(bytes)
            .and_then(|_| out.flush())
            .map_err(|source| CliError::Io {
                path: PathBuf::from("<stdout>"),
                source,
            });
    };
    let io_err = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(bytes).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

/// One ranked row of `top`.
#[derive(Debug, Clone, PartialEq)]
pub struct TopRow {
    pub label: String,
    pub value: u64,
    pub percent: f64,
}

pub fn top_tsv(rows: &[TopRow]) -> String {
    let mut s = String::new();
    for r in rows {
        s.push_str(&format!("{}\t{}\t{:.2}\n", r.label, r.value, r.percent));
    }
    s
}

pub fn top_pretty(rows: &[TopRow], metric: &str, color: bool) -> String {
    let value_header = metric.to_string();
    let lw = rows
        .iter()
        .map(|r| r.label.chars().count())
        .chain([8])
        .max()
        .unwrap_or(8);
    let vw = rows
        .iter()
        .map(|r| r.value.to_string().len())
        .chain([value_header.chars().count()])
        .max()
        .unwrap_or(0);
    let header = format!(
        "{:<lw$}  {:>vw$}  {:>7}",
        "function", value_header, "percent"
    );
    let mut s = if color {
        format!("\x1b[1m{header}\x1b[0m\n")
    } else {
        format!("{header}\n")
    };
    for r in rows {
        let pad = lw - r.label.chars().count();
        s.push_str(&format!(
            "{}{}  {:>vw$}  {:>6.2}%\n",
            r.label,
            " ".repeat(pad),
            r.value,
            r.percent
        ));
    }
    s
}
