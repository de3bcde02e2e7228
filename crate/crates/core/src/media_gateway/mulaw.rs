//! G.711 mu-law companding, 8-bit codes to 16-bit linear PCM and back.

const BIAS: i32 = 0x84;
const CLIP: i32 = 32635;

/// Expand one mu-law code to a 16-bit linear sample.
pub fn decode_sample(code: u8) -> i16 {
    let u = !code;
    let exponent = (u >> 4) & 0x07;
    let mantissa = (u & 0x0F) as i32;
    let magnitude = (((mantissa << 3) + BIAS) << exponent) - BIAS;
    if u & 0x80 != 0 {
        -magnitude as i16
    } else {
        magnitude as i16
    }
}

/// Compress one 16-bit linear sample to a mu-law code.
///
/// Zero always encodes to `0xFF`; the negative-zero code `0x7F` decodes to
/// the same sample and is never produced.
pub fn encode_sample(sample: i16) -> u8 {
    let mut value = sample as i32;
    let sign = if value < 0 {
        value = -value;
        0x80u8
    } else {
        0
    };
    value = value.min(CLIP) + BIAS;
    // Segment = position of the highest set bit above bit 7.
    let exponent = (31 - (value as u32).leading_zeros()).saturating_sub(7).min(7) as u8;
    let mantissa = ((value >> (exponent + 3)) & 0x0F) as u8;
    !(sign | (exponent << 4) | mantissa)
}

pub fn decode(codes: &[u8]) -> Vec<i16> {
    codes.iter().copied().map(decode_sample).collect()
}

pub fn encode(samples: &[i16]) -> Vec<u8> {
    samples.iter().copied().map(encode_sample).collect()
}
