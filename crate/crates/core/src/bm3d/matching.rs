use crate::image::Image;

use super::{Bm3dError, Bm3dProfile, Stage};

/// Top-left corner of a block, `(row, col)`.
pub type BlockPos = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockMatch {
    pub pos: BlockPos,
    /// `Σ (ref - cand)² / block_size²`
    pub distance: f64,
}

/// Largest power of two `<= n` (n >= 1).
pub(crate) fn floor_pow2(n: usize) -> usize {
    debug_assert!(n >= 1);
    1 << (usize::BITS - 1 - n.leading_zeros())
}

/// Groups blocks similar to the one at `reference`. The reference itself is
/// always first; the rest follow in ascending `(distance, row, col)` order and
/// the result is cut to the largest power of two not exceeding `max_group`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn match_raw(
    data: &[f64],
    width: usize,
    height: usize,
    bs: usize,
    reference: BlockPos,
    radius: usize,
    threshold: f64,
    max_group: usize,
) -> Vec<BlockMatch> {
    let (r0, c0) = reference;
    let row_lo = r0.saturating_sub(radius);
    let row_hi = (r0 + radius).min(height - bs);
    let col_lo = c0.saturating_sub(radius);
    let col_hi = (c0 + radius).min(width - bs);
    let norm = (bs * bs) as f64;
    let limit = threshold * norm;

    let mut found = Vec::new();
    for r in row_lo..=row_hi {
        for c in col_lo..=col_hi {
            if (r, c) == reference {
                continue;
            }
            let mut sum = 0.0;
            for i in 0..bs {
                let a = &data[(r0 + i) * width + c0..(r0 + i) * width + c0 + bs];
                let b = &data[(r + i) * width + c..(r + i) * width + c + bs];
                sum += a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
                if sum > limit {
                    break;
                }
            }
            if sum <= limit {
                found.push(BlockMatch { pos: (r, c), distance: sum / norm });
            }
        }
    }
    let order = |a: &BlockMatch, b: &BlockMatch| a.distance.total_cmp(&b.distance).then(a.pos.cmp(&b.pos));
    let keep = floor_pow2((found.len() + 1).min(max_group));
    if keep - 1 < found.len() && keep > 1 {
        found.select_nth_unstable_by(keep - 2, order);
    }
    found.truncate(keep - 1);
    found.sort_by(order);

    let mut out = Vec::with_capacity(keep);
    out.push(BlockMatch { pos: reference, distance: 0.0 });
    out.extend(found);
    out
}

/// Block matching on `img` around `reference` with the stage's threshold
/// and group cap.
pub fn block_match(
    img: &Image,
    reference: BlockPos,
    profile: &Bm3dProfile,
    stage: Stage,
) -> Result<Vec<BlockMatch>, Bm3dError> {
    profile.validate()?;
    let bs = profile.block_size;
    if img.width() < bs || img.height() < bs {
        return Err(Bm3dError::ImageTooSmall { width: img.width(), height: img.height(), block: bs });
    }
    if reference.0 + bs > img.height() || reference.1 + bs > img.width() {
        return Err(Bm3dError::OutOfBounds(reference));
    }
    let (threshold, max_group) = match stage {
        Stage::Hard => (profile.match_threshold1, profile.max_group1),
        Stage::Wiener => (profile.match_threshold2, profile.max_group2),
    };
    Ok(match_raw(img.data(), img.width(), img.height(), bs, reference, profile.search_radius, threshold, max_group))
}
