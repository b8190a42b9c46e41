//! Line-oriented model descriptions.
//!
//! ```text
//! conv C H W K kH kW padH padW sH sW
//! poolmax kH kW sH sW
//! relu
//! ```
//!
//! Blank lines and `#` comments are ignored. The first layer must be a
//! convolution; its `C H W` fixes the model input.

use std::fmt;
use std::path::Path;

use portten_core::conv::ConvGeometry;
use portten_core::layers::PoolGeometry;

use crate::{Error, Result};

pub const BUNDLED_MODELS: [(&str, &str); 2] = [
    ("vgg-a", include_str!("../../models/vgg-a.txt")),
    ("alexnet", include_str!("../../models/alexnet.txt")),
];

/// Channels, height, width of one image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.channels, self.height, self.width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Conv {
        input: Shape,
        out_channels: usize,
        kernel_h: usize,
        kernel_w: usize,
        pad_h: usize,
        pad_w: usize,
        stride_h: usize,
        stride_w: usize,
    },
    PoolMax(PoolGeometry),
    Relu,
}

impl LayerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Conv { .. } => "conv",
            LayerSpec::PoolMax(_) => "poolmax",
            LayerSpec::Relu => "relu",
        }
    }

    pub fn conv_geometry(&self, batch: usize) -> Option<ConvGeometry> {
        match *self {
            LayerSpec::Conv { input, out_channels, kernel_h, kernel_w, pad_h, pad_w, stride_h, stride_w } => Some(ConvGeometry {
                batch,
                in_channels: input.channels,
                in_h: input.height,
                in_w: input.width,
                out_channels,
                kernel_h,
                kernel_w,
                pad_h,
                pad_w,
                stride_h,
                stride_w,
            }),
            _ => None,
        }
    }

    /// Output shape for `input`, or why the layer cannot accept it.
    pub fn output(&self, input: Shape) -> std::result::Result<Shape, String> {
        match self {
            LayerSpec::Conv { input: declared, out_channels, .. } => {
                if *declared != input {
                    return Err(format!("conv declares input {declared} but receives {input}"));
                }
                let g = self.conv_geometry(1).expect("conv layer");
                g.validate().map_err(|e| e.to_string())?;
                Ok(Shape { channels: *out_channels, height: g.out_h(), width: g.out_w() })
            }
            LayerSpec::PoolMax(p) => {
                p.validate(input.height, input.width).map_err(|e| e.to_string())?;
                Ok(Shape { channels: input.channels, height: p.out_h(input.height), width: p.out_w(input.width) })
            }
            LayerSpec::Relu => Ok(input),
        }
    }

    /// Human-readable geometry for `input`.
    pub fn describe(&self, input: Shape) -> String {
        let output = self.output(input).map(|s| s.to_string()).unwrap_or_else(|_| "?".into());
        match self {
            LayerSpec::Conv { kernel_h, kernel_w, pad_h, pad_w, stride_h, stride_w, .. } => {
                format!("{input}->{output} k{kernel_h}x{kernel_w} p{pad_h}x{pad_w} s{stride_h}x{stride_w}")
            }
            LayerSpec::PoolMax(p) => format!("{input}->{output} k{}x{} s{}x{}", p.kernel_h, p.kernel_w, p.stride_h, p.stride_w),
            LayerSpec::Relu => input.to_string(),
        }
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::Conv { input, out_channels, kernel_h, kernel_w, pad_h, pad_w, stride_h, stride_w } => write!(
                f,
                "conv {} {} {} {out_channels} {kernel_h} {kernel_w} {pad_h} {pad_w} {stride_h} {stride_w}",
                input.channels, input.height, input.width
            ),
            LayerSpec::PoolMax(p) => write!(f, "poolmax {} {} {} {}", p.kernel_h, p.kernel_w, p.stride_h, p.stride_w),
            LayerSpec::Relu => write!(f, "relu"),
        }
    }
}

fn parse_line(line: &str) -> std::result::Result<LayerSpec, String> {
    let mut words = line.split_whitespace();
    let kind = words.next().unwrap_or_default();
    let args = words
        .map(|w| w.parse::<usize>().map_err(|_| format!("{w:?} is not a non-negative integer")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let expect = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            Err(format!("`{kind}` takes {n} arguments, got {}", args.len()))
        }
    };
    match kind {
        "conv" => {
            expect(10)?;
            Ok(LayerSpec::Conv {
                input: Shape { channels: args[0], height: args[1], width: args[2] },
                out_channels: args[3],
                kernel_h: args[4],
                kernel_w: args[5],
                pad_h: args[6],
                pad_w: args[7],
                stride_h: args[8],
                stride_w: args[9],
            })
        }
        "poolmax" => {
            expect(4)?;
            Ok(LayerSpec::PoolMax(PoolGeometry::new(args[0], args[1], args[2], args[3])))
        }
        "relu" => {
            expect(0)?;
            Ok(LayerSpec::Relu)
        }
        other => Err(format!("unknown layer type {other:?}")),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub name: String,
    pub layers: Vec<LayerSpec>,
}

impl ModelSpec {
    /// Parses and validates a model description.
    pub fn parse(name: &str, text: &str) -> Result<Self> {
        let mut layers = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            layers.push(parse_line(line).map_err(|message| Error::Parse { line: i + 1, message })?);
        }
        let spec = Self { name: name.into(), layers };
        spec.validate()?;
        Ok(spec)
    }

    /// A bundled model by name, otherwise a spec file path.
    pub fn load(name_or_path: &str) -> Result<Self> {
        if let Some((name, text)) = BUNDLED_MODELS.iter().find(|(n, _)| *n == name_or_path) {
            return Self::parse(name, text);
        }
        let path = Path::new(name_or_path);
        if !path.is_file() {
            let known: Vec<&str> = BUNDLED_MODELS.iter().map(|(n, _)| *n).collect();
            return Err(Error::Validation(format!(
                "unknown model {name_or_path:?}: not a bundled model ({}) or a readable file",
                known.join(", ")
            )));
        }
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| name_or_path.into());
        Self::parse(&name, &std::fs::read_to_string(path)?)
    }

    pub fn input_shape(&self) -> Result<Shape> {
        match self.layers.first() {
            Some(LayerSpec::Conv { input, .. }) => Ok(*input),
            Some(_) => Err(Error::Chain { index: 0, message: "the first layer must be a convolution".into() }),
            None => Err(Error::Validation(format!("model {:?} has no layers", self.name))),
        }
    }

    /// Input shape of every layer followed by the final output shape.
    pub fn shapes(&self) -> Result<Vec<Shape>> {
        let mut shapes = vec![self.input_shape()?];
        for (index, layer) in self.layers.iter().enumerate() {
            let next = layer.output(shapes[index]).map_err(|message| Error::Chain { index, message })?;
            shapes.push(next);
        }
        Ok(shapes)
    }

    pub fn validate(&self) -> Result<()> {
        self.shapes().map(|_| ())
    }

    pub fn weight_layers(&self) -> usize {
        self.layers.iter().filter(|l| matches!(l, LayerSpec::Conv { .. })).count()
    }

    /// Divides every channel count by `scale`, except the image channels of
    /// the first layer and the output channels of the last convolution.
    /// Spatial sizes are unchanged.
    pub fn scaled(&self, scale: usize) -> Result<Self> {
        if scale == 0 {
            return Err(Error::Validation("scale must be at least 1".into()));
        }
        let convs: Vec<usize> = (0..self.layers.len()).filter(|&i| matches!(self.layers[i], LayerSpec::Conv { .. })).collect();
        let (first, last) = (convs.first().copied(), convs.last().copied());
        let divide = |value: usize, what: &str, index: usize| {
            if value.is_multiple_of(scale) {
                Ok(value / scale)
            } else {
                Err(Error::Validation(format!("scale {scale} does not divide {what} {value} of layer {index}")))
            }
        };
        let mut layers = self.layers.clone();
        for (index, layer) in layers.iter_mut().enumerate() {
            if let LayerSpec::Conv { input, out_channels, .. } = layer {
                if Some(index) != first {
                    input.channels = divide(input.channels, "input channels", index)?;
                }
                if Some(index) != last {
                    *out_channels = divide(*out_channels, "output channels", index)?;
                }
            }
        }
        let spec = Self { name: self.name.clone(), layers };
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_text(&self) -> String {
        self.layers.iter().map(|l| format!("{l}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vgg_a_has_eleven_weight_layers() {
        let spec = ModelSpec::load("vgg-a").unwrap();
        assert_eq!(spec.weight_layers(), 11);
        assert_eq!(spec.input_shape().unwrap(), Shape { channels: 3, height: 224, width: 224 });
        let out = *spec.shapes().unwrap().last().unwrap();
        assert_eq!(out, Shape { channels: 1000, height: 1, width: 1 });
    }

    #[test]
    fn alexnet_opens_with_large_kernels() {
        let spec = ModelSpec::load("alexnet").unwrap();
        match spec.layers[0] {
            LayerSpec::Conv { kernel_h, kernel_w, stride_h, .. } => assert_eq!((kernel_h, kernel_w, stride_h), (11, 11, 4)),
            _ => panic!("first layer is not a convolution"),
        }
        assert_eq!(spec.shapes().unwrap()[1].height, 55);
    }

    #[test]
    fn chain_break_reports_layer_index() {
        let text = "conv 3 8 8 4 3 3 1 1 1 1\nrelu\nconv 5 8 8 4 3 3 1 1 1 1\n";
        match ModelSpec::parse("m", text) {
            Err(Error::Chain { index, .. }) => assert_eq!(index, 2),
            other => panic!("expected a chain error, got {other:?}"),
        }
        match ModelSpec::parse("m", "conv 3 8 8 4 3 3 1 1 1 1\npoolmax 9 9 1 1\n") {
            Err(Error::Chain { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected a chain error, got {other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        match ModelSpec::parse("m", "# header\nconv 3 8 8\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(ModelSpec::parse("m", "dense 3\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(ModelSpec::parse("m", "relu\n"), Err(Error::Chain { index: 0, .. })));
    }

    #[test]
    fn scaling_divides_channels() {
        let spec = ModelSpec::load("vgg-a").unwrap().scaled(16).unwrap();
        let shapes = spec.shapes().unwrap();
        assert_eq!(shapes[1], Shape { channels: 4, height: 224, width: 224 });
        assert_eq!(shapes.last().unwrap().channels, 1000);
        assert!(matches!(ModelSpec::load("vgg-a").unwrap().scaled(7), Err(Error::Validation(_))));
        assert!(ModelSpec::load("alexnet").unwrap().scaled(16).is_ok());
        assert_eq!(ModelSpec::load("vgg-a").unwrap().scaled(1).unwrap(), ModelSpec::load("vgg-a").unwrap());
    }

    #[test]
    fn text_round_trip() {
        let spec = ModelSpec::load("alexnet").unwrap();
        assert_eq!(ModelSpec::parse("alexnet", &spec.to_text()).unwrap(), spec);
    }

    #[test]
    fn unknown_model() {
        assert!(matches!(ModelSpec::load("googlenet"), Err(Error::Validation(_))));
    }
}
