//! Salient-object ground truth: mask files or an external generator.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::{Arc, Mutex};

use camquant_core::colormap::luminance;
use camquant_core::{resize_bilinear, Grid};
use image::{DynamicImage, GrayImage, ImageFormat};

use crate::error::{Error, Result};
use crate::heatmap_io::atomic_write;

/// Foreground map with values in `[0, 1]` (1 = foreground).
#[derive(Debug, Clone, PartialEq)]
pub struct SalientObjectMask(Grid<f32>);

impl SalientObjectMask {
    pub fn grid(&self) -> &Grid<f32> {
        &self.0
    }

    pub fn into_grid(self) -> Grid<f32> {
        self.0
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn values(&self) -> &[f32] {
        self.0.as_slice()
    }
}

/// Read an 8-bit grayscale mask as values / 255, bilinearly resized to the target size.
///
/// Colour images are reduced to luminance with a warning.
pub fn load_mask(path: &Path, target_h: usize, target_w: usize) -> Result<SalientObjectMask> {
    if target_h == 0 || target_w == 0 {
        return Err(Error::SizeMismatch("mask target dimensions must be positive".into()));
    }
    let gray = read_gray(path)?;
    let resized = resize_bilinear(&gray, target_h, target_w);
    Ok(SalientObjectMask(resized.map(|v| v.clamp(0.0, 1.0))))
}

/// Mask pixels scaled to `[0, 1]` at the file's own resolution.
pub fn read_gray(path: &Path) -> Result<Grid<f32>> {
    if !path.is_file() {
        return Err(Error::MaskNotFound(path.to_path_buf()));
    }
    let img = image::open(path).map_err(|e| Error::image(path, e))?;
    let gray = match img {
        DynamicImage::ImageLuma8(g) => g,
        other => {
            log::warn!(
                "{}: {:?} mask converted to grayscale via luminance",
                path.display(),
                other.color()
            );
            let rgb = other.to_rgb8();
            let (w, h) = rgb.dimensions();
            let luma = rgb.pixels().map(|p| luminance(p.0)).collect();
            GrayImage::from_raw(w, h, luma).expect("one value per pixel")
        }
    };
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    let values = gray.into_raw().into_iter().map(|p| f32::from(p) / 255.0).collect();
    Ok(Grid::new(h, w, values)?)
}

/// Store a mask as an 8-bit grayscale PNG (the format [`load_mask`] reads).
pub fn save_mask(path: &Path, mask: &Grid<f32>) -> Result<()> {
    let pixels = mask
        .as_slice()
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let img = GrayImage::from_raw(mask.width() as u32, mask.height() as u32, pixels)
        .expect("buffer length matches dimensions");
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png).map_err(|e| Error::image(path, e))?;
    atomic_write(path, &buf.into_inner())
}

/// An external salient-object model producing one grayscale PNG per image.
pub trait MaskGenerator: Send + Sync {
    /// Run on `image` and write the foreground map to `output`.
    fn generate(&self, image: &Path, output: &Path) -> Result<()>;

    fn describe(&self) -> String;
}

/// Runs a program per image. `{input}` and `{output}` in the arguments are
/// replaced with the image path and the PNG path to produce; without
/// placeholders the two paths are appended.
pub struct CommandGenerator {
    program: String,
    args: Vec<String>,
    lock: Mutex<()>,
}

impl CommandGenerator {
    pub fn new(program: impl Into<String>, args: Vec<String>) -> Self {
        Self {
            program: program.into(),
            args,
            lock: Mutex::new(()),
        }
    }

    fn expanded_args(&self, image: &Path, output: &Path) -> Vec<String> {
        let has_placeholder = self.args.iter().any(|a| a.contains("{input}") || a.contains("{output}"));
        let mut args: Vec<String> = self
            .args
            .iter()
            .map(|a| {
                a.replace("{input}", &image.to_string_lossy())
                    .replace("{output}", &output.to_string_lossy())
            })
            .collect();
        if !has_placeholder {
            args.push(image.to_string_lossy().into_owned());
            args.push(output.to_string_lossy().into_owned());
        }
        args
    }
}

impl fmt::Debug for CommandGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

impl MaskGenerator for CommandGenerator {
    fn generate(&self, image: &Path, output: &Path) -> Result<()> {
        let _serial = self.lock.lock().unwrap_or_else(|p| p.into_inner());
        let out = Command::new(&self.program)
            .args(self.expanded_args(image, output))
            .output()
            .map_err(|e| Error::GeneratorFailed(format!("{}: {e}", self.program)))?;
        if !out.status.success() {
            return Err(Error::GeneratorFailed(format!(
                "{} exited with {}: {}",
                self.program,
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        if !output.is_file() {
            return Err(Error::GeneratorFailed(format!("{} wrote no mask", self.program)));
        }
        Ok(())
    }

    fn describe(&self) -> String {
        format!("command:{} {}", self.program, self.args.join(" "))
    }
}

/// Mask for `image` from the generator, cached as `<cache_dir>/<image_id>.png`.
///
/// A cached file is reused without calling the generator.
pub fn generate_mask(
    image: &Path,
    image_id: &str,
    generator: Option<&dyn MaskGenerator>,
    cache_dir: &Path,
    target_h: usize,
    target_w: usize,
) -> Result<SalientObjectMask> {
    let cached = cache_dir.join(format!("{image_id}.png"));
    if cached.is_file() {
        return load_mask(&cached, target_h, target_w);
    }
    let generator = generator.ok_or(Error::GeneratorNotConfigured)?;
    std::fs::create_dir_all(cache_dir).map_err(|e| Error::io(cache_dir, e))?;
    let raw = cache_dir.join(format!("{image_id}.raw-{}.png", std::process::id()));
    generator.generate(image, &raw)?;
    let gray = read_gray(&raw);
    let _ = std::fs::remove_file(&raw);
    save_mask(&cached, &gray?)?;
    load_mask(&cached, target_h, target_w)
}

/// Where ground-truth masks come from for a run.
#[derive(Clone)]
pub enum MaskSource {
    Dir(PathBuf),
    Generator {
        generator: Arc<dyn MaskGenerator>,
        cache_dir: PathBuf,
    },
}

impl fmt::Debug for MaskSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Dir(d) => f.debug_tuple("Dir").field(d).finish(),
            Self::Generator { generator, cache_dir } => f
                .debug_struct("Generator")
                .field("generator", &generator.describe())
                .field("cache_dir", cache_dir)
                .finish(),
        }
    }
}

impl MaskSource {
    /// Prefer an existing mask directory, fall back to the generator, and
    /// fail before any model work when neither is usable.
    pub fn resolve(
        mask_dir: Option<&Path>,
        generator: Option<Arc<dyn MaskGenerator>>,
        cache_dir: &Path,
    ) -> Result<Self> {
        match (mask_dir.filter(|d| d.is_dir()), generator) {
            (Some(dir), _) => Ok(Self::Dir(dir.to_path_buf())),
            (None, Some(generator)) => Ok(Self::Generator {
                generator,
                cache_dir: cache_dir.join("masks"),
            }),
            (None, None) => Err(Error::GeneratorNotConfigured),
        }
    }

    /// Path the mask for `image_id` is (or will be) stored at.
    pub fn mask_path(&self, image_id: &str) -> PathBuf {
        match self {
            Self::Dir(dir) => dir.join(format!("{image_id}.png")),
            Self::Generator { cache_dir, .. } => cache_dir.join(format!("{image_id}.png")),
        }
    }

    pub fn load(&self, image: &Path, image_id: &str, target_h: usize, target_w: usize) -> Result<SalientObjectMask> {
        match self {
            Self::Dir(_) => load_mask(&self.mask_path(image_id), target_h, target_w),
            Self::Generator { generator, cache_dir } => {
                generate_mask(image, image_id, Some(generator.as_ref()), cache_dir, target_h, target_w)
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Self::Dir(d) => format!("dir:{}", d.display()),
            Self::Generator { generator, .. } => generator.describe(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_gray(path: &Path, w: u32, h: u32, f: impl Fn(u32, u32) -> u8) {
        GrayImage::from_fn(w, h, |x, y| image::Luma([f(x, y)])).save(path).unwrap();
    }

    #[test]
    fn white_and_black_masks() {
        let dir = tempfile::tempdir().unwrap();
        let white = dir.path().join("w.png");
        let black = dir.path().join("b.png");
        write_gray(&white, 5, 3, |_, _| 255);
        write_gray(&black, 5, 3, |_, _| 0);
        assert!(load_mask(&white, 7, 9).unwrap().values().iter().all(|&v| v == 1.0));
        assert!(load_mask(&black, 7, 9).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn missing_mask() {
        let err = load_mask(Path::new("/nonexistent/m.png"), 2, 2).unwrap_err();
        assert_eq!(err.to_string(), "mask not found: /nonexistent/m.png");
    }

    #[test]
    fn colour_mask_uses_luminance() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.png");
        image::RgbImage::from_pixel(2, 2, image::Rgb([200, 200, 200])).save(&p).unwrap();
        let m = load_mask(&p, 2, 2).unwrap();
        assert!(m.values().iter().all(|&v| (v - 200.0 / 255.0).abs() < 1e-6));
    }

    #[test]
    fn save_then_load_round_trips_to_storage_precision() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.png");
        let g = Grid::from_fn(4, 6, |r, c| ((r * 6 + c) as f32) / 23.0);
        save_mask(&p, &g).unwrap();
        let back = load_mask(&p, 4, 6).unwrap();
        for (a, b) in g.as_slice().iter().zip(back.values()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-6);
        }
    }

    struct Fixed;

    impl MaskGenerator for Fixed {
        fn generate(&self, _image: &Path, output: &Path) -> Result<()> {
            GrayImage::from_fn(4, 4, |x, _| image::Luma([(x * 60) as u8])).save(output).unwrap();
            Ok(())
        }

        fn describe(&self) -> String {
            "fixed".into()
        }
    }

    #[test]
    fn generated_mask_matches_cached_file() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("img.png");
        let generated = generate_mask(&img, "img", Some(&Fixed), dir.path(), 4, 4).unwrap();
        let loaded = load_mask(&dir.path().join("img.png"), 4, 4).unwrap();
        assert_eq!(generated, loaded);
        // cache hit without a generator
        let again = generate_mask(&img, "img", None, dir.path(), 4, 4).unwrap();
        assert_eq!(again, generated);
    }

    #[test]
    fn source_resolution() {
        let dir = tempfile::tempdir().unwrap();
        let masks = dir.path().join("masks");
        std::fs::create_dir(&masks).unwrap();
        assert!(matches!(
            MaskSource::resolve(Some(&masks), None, dir.path()).unwrap(),
            MaskSource::Dir(_)
        ));
        let missing = dir.path().join("nope");
        let err = MaskSource::resolve(Some(&missing), None, dir.path()).unwrap_err();
        assert!(matches!(err, Error::GeneratorNotConfigured));
        let gen: Arc<dyn MaskGenerator> = Arc::new(Fixed);
        assert!(matches!(
            MaskSource::resolve(Some(&missing), Some(gen), dir.path()).unwrap(),
            MaskSource::Generator { .. }
        ));
    }

    #[test]
    fn command_generator_arguments() {
        let g = CommandGenerator::new("tool", vec!["--in".into(), "{input}".into(), "-o={output}".into()]);
        assert_eq!(
            g.expanded_args(Path::new("a.jpg"), Path::new("b.png")),
            vec!["--in", "a.jpg", "-o=b.png"]
        );
        let plain = CommandGenerator::new("tool", vec!["-q".into()]);
        assert_eq!(
            plain.expanded_args(Path::new("a.jpg"), Path::new("b.png")),
            vec!["-q", "a.jpg", "b.png"]
        );
    }
}
