use std::fmt;

use serde::{Deserialize, Serialize};

use super::GrayImage;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionClass {
    RasterImage,
    Text,
    Other,
}

impl fmt::Display for RegionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegionClass::RasterImage => "raster_image",
            RegionClass::Text => "text",
            RegionClass::Other => "other",
        })
    }
}

/// Region geometry in page pixel coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionShape {
    /// `[x, y, w, h]`
    Rect([usize; 4]),
    /// Closed polygon; the last vertex connects back to the first.
    Polygon(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionSpec {
    pub id: String,
    pub class: RegionClass,
    pub shape: RegionShape,
}

impl RegionSpec {
    pub fn rect(id: impl Into<String>, class: RegionClass, x: usize, y: usize, w: usize, h: usize) -> Self {
        RegionSpec {
            id: id.into(),
            class,
            shape: RegionShape::Rect([x, y, w, h]),
        }
    }

    pub fn polygon(id: impl Into<String>, class: RegionClass, vertices: Vec<[f64; 2]>) -> Self {
        RegionSpec {
            id: id.into(),
            class,
            shape: RegionShape::Polygon(vertices),
        }
    }

    /// Pixel bounding box `(x, y, w, h)` after validating against a page size.
    pub fn bounding_box(&self, page_width: usize, page_height: usize) -> Result<(usize, usize, usize, usize)> {
        let out_of_bounds = || Error::RegionOutOfBounds(self.id.clone());
        match &self.shape {
            RegionShape::Rect([x, y, w, h]) => {
                if *w == 0 || *h == 0 {
                    return Err(Error::InvalidRegion {
                        id: self.id.clone(),
                        reason: "rectangle with zero extent".into(),
                    });
                }
                if x + w > page_width || y + h > page_height {
                    return Err(out_of_bounds());
                }
                Ok((*x, *y, *w, *h))
            }
            RegionShape::Polygon(vertices) => {
                if vertices.len() < 3 {
                    return Err(Error::InvalidRegion {
                        id: self.id.clone(),
                        reason: format!("polygon with {} vertices", vertices.len()),
                    });
                }
                if vertices.iter().flatten().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidRegion {
                        id: self.id.clone(),
                        reason: "non-finite vertex".into(),
                    });
                }
                let (mut min_x, mut min_y) = (f64::INFINITY, f64::INFINITY);
                let (mut max_x, mut max_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
                for &[vx, vy] in vertices {
                    min_x = min_x.min(vx);
                    min_y = min_y.min(vy);
                    max_x = max_x.max(vx);
                    max_y = max_y.max(vy);
                }
                if min_x < 0.0 || min_y < 0.0 || max_x > page_width as f64 || max_y > page_height as f64 {
                    return Err(out_of_bounds());
                }
                let x0 = min_x.floor() as usize;
                let y0 = min_y.floor() as usize;
                let x1 = (max_x.ceil() as usize).max(x0 + 1);
                let y1 = (max_y.ceil() as usize).max(y0 + 1);
                if x1 > page_width || y1 > page_height {
                    return Err(out_of_bounds());
                }
                Ok((x0, y0, x1 - x0, y1 - y0))
            }
        }
    }
}

/// Even-odd test of point `(px, py)` against a closed polygon.
pub(crate) fn point_in_polygon(px: f64, py: f64, vertices: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let mut j = vertices.len() - 1;
    for i in 0..vertices.len() {
        let [xi, yi] = vertices[i];
        let [xj, yj] = vertices[j];
        if (yi > py) != (yj > py) {
            let x_cross = xi + (py - yi) * (xj - xi) / (yj - yi);
            if px < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Crops the bounding box of `region`. Polygon exteriors (tested at pixel
/// centres) are filled white. With `strict`, only raster-image regions are
/// accepted.
pub fn crop_region(page: &GrayImage, region: &RegionSpec, strict: bool) -> Result<GrayImage> {
    if strict && region.class != RegionClass::RasterImage {
        return Err(Error::WrongRegionClass {
            id: region.id.clone(),
            class: region.class.to_string(),
        });
    }
    let (x0, y0, w, h) = region.bounding_box(page.width(), page.height())?;
    match &region.shape {
        RegionShape::Rect(_) => GrayImage::from_fn(w, h, page.dpi(), |x, y| page.get(x0 + x, y0 + y)),
        RegionShape::Polygon(vertices) => GrayImage::from_fn(w, h, page.dpi(), |x, y| {
            let (px, py) = (x0 + x, y0 + y);
            if point_in_polygon(px as f64 + 0.5, py as f64 + 0.5, vertices) {
                page.get(px, py)
            } else {
                255
            }
        }),
    }
}
