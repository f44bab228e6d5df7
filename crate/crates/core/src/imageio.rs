//! 8-bit grayscale PNG input and output.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::labelgen::{AngleMap, ClassMap};
use crate::scalar::Scalar;

fn image_err(path: &Path, message: impl ToString) -> Error {
    Error::Image { path: path.to_path_buf(), message: message.to_string() }
}

/// Reads a PNG as 8-bit grayscale. RGB(A) inputs are reduced by channel
/// mean; 16-bit samples keep their high byte.
pub fn read_gray(path: &Path) -> Result<Grid<u8>> {
    let file = File::open(path).map_err(|e| image_err(path, e))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder.read_info().map_err(|e| image_err(path, e))?;
    let size = reader.output_buffer_size().ok_or_else(|| image_err(path, "image too large"))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(|e| image_err(path, e))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let channels = info.color_type.samples();
    let stride = info.line_size;
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let row = &buf[y * stride..];
        for x in 0..w {
            let px = &row[x * channels..(x + 1) * channels];
            let v = match channels {
                1 | 2 => px[0],
                _ => ((px[0] as u32 + px[1] as u32 + px[2] as u32) / 3) as u8,
            };
            out.push(v);
        }
    }
    Grid::from_vec(w, h, out)
}

pub fn write_gray(path: &Path, image: &Grid<u8>) -> Result<()> {
    let file = File::create(path).map_err(|e| image_err(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), image.width() as u32, image.height() as u32);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder.write_header().map_err(|e| image_err(path, e))?;
    writer.write_image_data(image.data()).map_err(|e| image_err(path, e))?;
    writer.finish().map_err(|e| image_err(path, e))
}

/// Background 0, bee 128, abdomen 255.
pub fn class_map_image(map: &ClassMap) -> Grid<u8> {
    map.map(|&c| match c {
        0 => 0,
        1 => 128,
        _ => 255,
    })
}

/// Angles scaled from `[0, 360)` onto `[1, 255]`; background stays 0.
pub fn angle_map_image<T: Scalar>(map: &AngleMap<T>) -> Grid<u8> {
    map.map(|&a| {
        let a = a.as_f64();
        if a < 0.0 {
            0
        } else {
            (1.0 + a / 360.0 * 254.0).round().clamp(1.0, 255.0) as u8
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip() {
        let dir = std::env::temp_dir().join(format!("combtrack-imageio-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("g.png");
        let img = Grid::from_vec(7, 5, (0..35).map(|v| (v * 7) as u8).collect()).unwrap();
        write_gray(&path, &img).unwrap();
        assert_eq!(read_gray(&path).unwrap(), img);
        assert!(matches!(read_gray(&dir.join("missing.png")), Err(Error::Image { .. })));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn debug_palettes() {
        let classes = Grid::from_vec(3, 1, vec![0u8, 1, 2]).unwrap();
        assert_eq!(class_map_image(&classes).data(), &[0, 128, 255]);
        let angles = Grid::from_vec(3, 1, vec![-1.0f32, 0.0, 359.9]).unwrap();
        assert_eq!(angle_map_image(&angles).data(), &[0, 1, 255]);
    }
}
