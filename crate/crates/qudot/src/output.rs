//! Artifact writing. Floats are always printed with 17 significant digits
//! so that two runs can be compared byte for byte.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use sha2::{Digest, Sha256};

use crate::config::TableFormat;
use crate::manifest::{FileEntry, RunManifest, MANIFEST_NAME};
use crate::CliError;

/// Scientific notation with 16 digits after the point.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Pretty JSON whose floats go through [`num`].
struct Digits17<'a>(PrettyFormatter<'a>);

impl Formatter for Digits17<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(num(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("in-memory serialization");
    buf.push(b'\n');
    buf
}

/// A table: header plus preformatted cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory csv");
        for r in &self.rows {
            w.write_record(r).expect("in-memory csv");
        }
        w.into_inner().expect("in-memory csv")
    }

    /// Array of objects keyed by header; cells stay strings so that the
    /// digits are exactly those of the CSV.
    pub fn to_json(&self) -> Vec<u8> {
        let rows: Vec<serde_json::Map<String, serde_json::Value>> = self
            .rows
            .iter()
            .map(|r| {
                self.header
                    .iter()
                    .cloned()
                    .zip(r.iter().map(|c| serde_json::Value::String(c.clone())))
                    .collect()
            })
            .collect();
        to_json(&rows)
    }
}

/// Output directory of one run. Tracks what was written so the manifest can
/// list it.
pub struct OutputDir {
    root: PathBuf,
    formats: Vec<TableFormat>,
    files: Vec<FileEntry>,
}

impl OutputDir {
    /// Creates `root` if needed. A directory is reused only when it is empty
    /// or holds exactly the files of an earlier run's manifest, which are
    /// then removed.
    pub fn prepare(root: &Path, formats: &[TableFormat]) -> Result<Self, CliError> {
        let io_err = |e: io::Error| CliError::Io(format!("{}: {e}", root.display()));
        fs::create_dir_all(root).map_err(io_err)?;
        let present = list_dir(root).map_err(io_err)?;
        if !present.is_empty() {
            let previous = fs::read(root.join(MANIFEST_NAME))
                .ok()
                .and_then(|raw| serde_json::from_slice::<RunManifest>(&raw).ok());
            let owned = previous.map(|m| m.all_names()).unwrap_or_default();
            if present.iter().any(|p| !owned.contains(p)) {
                return Err(CliError::Config(format!(
                    "output directory {} is not empty and was not written by a previous run",
                    root.display()
                )));
            }
            for name in present {
                fs::remove_file(root.join(name)).map_err(io_err)?;
            }
        }
        Ok(Self {
            root: root.to_path_buf(),
            formats: formats.to_vec(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.root.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.files.push(FileEntry {
            name: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: hex(&Sha256::digest(bytes)),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        self.write_bytes(name, &to_json(value))
    }

    /// Writes `stem.csv` and/or `stem.json` depending on the configured
    /// formats.
    pub fn write_table(&mut self, stem: &str, table: &Table) -> Result<(), CliError> {
        for f in self.formats.clone() {
            match f {
                TableFormat::Csv => self.write_bytes(&format!("{stem}.csv"), &table.to_csv())?,
                TableFormat::Json => self.write_bytes(&format!("{stem}.json"), &table.to_json())?,
            }
        }
        Ok(())
    }

    pub fn into_files(self) -> Vec<FileEntry> {
        self.files
    }
}

pub fn list_dir(root: &Path) -> io::Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in fs::read_dir(root)? {
        names.push(entry?.file_name().to_string_lossy().into_owned());
    }
    names.sort();
    Ok(names)
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
