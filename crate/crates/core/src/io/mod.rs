//! On-disk formats: packed event files, 16-bit images, and the dataset layout
//! `<root>/<sequence>/<index>/{short.img, long.img, gt.img, events.evt, meta.cfg}`.

pub mod dataset;
pub mod evt;
pub mod img;

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &std::path::Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}
