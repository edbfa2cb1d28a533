from pathlib import Path
from typing import Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import structlog  # noqa: E402
from matplotlib.colors import Normalize  # noqa: E402

from app.models.experiment import Heatmap  # noqa: E402

logger = structlog.get_logger(__name__)

COLORMAP = "RdBu_r"
# Fixed salt keeps generated SVG ids stable between runs.
SVG_SALT = "polytransfer"


def _norm(h: Heatmap) -> Normalize:
    return Normalize(vmin=-h.value_range, vmax=h.value_range, clip=True)


def cell_colors(h: Heatmap) -> np.ndarray:
    """RGBA per cell under the symmetric diverging scale, shape (rows, cols, 4)"""
    return plt.get_cmap(COLORMAP)(_norm(h)(h.values))


def emit_svg_heatmap(h: Heatmap, path: Union[str, Path]) -> Path:
    """Standalone SVG of coloured cells with axis ticks and a colour bar"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows, cols = h.values.shape
    xs = np.linspace(h.x_lo, h.x_hi, cols + 1)
    ys = np.linspace(h.y_lo, h.y_hi, rows + 1)

    with plt.rc_context({"svg.hashsalt": SVG_SALT, "svg.fonttype": "path"}):
        fig, ax = plt.subplots(figsize=(5.0, 4.2))
        mesh = ax.pcolormesh(xs, ys, h.values, cmap=COLORMAP, norm=_norm(h), shading="flat")
        ax.set_xlim(h.x_lo, h.x_hi)
        ax.set_ylim(h.y_lo, h.y_hi)
        ax.set_aspect("equal")
        if h.title:
            ax.set_title(h.title, fontsize=9)
        fig.colorbar(mesh, ax=ax)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    logger.debug("heatmap_written", path=str(path), resolution=[rows, cols])
    return path
