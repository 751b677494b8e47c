"""Event-camera kit: representations, structure losses, fusion, evaluation.

The package turns sparse brightness-change event streams into dense
tensors, fits edge-like structure images against RGB supervision with
closed-form gradients, runs cross-modal feature fusion (gating plus global
attention), and scores detections with COCO-style mAP. Hot loops run
through ``efk.kernels`` (numba-jitted with a pure-numpy fallback selected
by the ``EFK_BACKEND`` environment variable).
"""

from efk.errors import (
    ConfigError,
    DivergenceError,
    EfkError,
    EmptyWindowError,
    FormatError,
    GeometryError,
    ShapeError,
    WeightsError,
)
from efk.events import (
    Event,
    EventWindow,
    SimConfig,
    decode_events,
    encode_events,
    simulate_events,
    window_slice,
)
from efk.representations import (
    PolarityIntegration,
    TimestampFrame,
    polarity_integration,
    render_png,
    timestamp_frame,
)
from efk.structure import (
    CcConfig,
    OptConfig,
    SifImage,
    SupervisionMap,
    cc_loss,
    edge_map,
    fit_sif,
    grad_total,
    laplace_edges,
    local_cc,
    roberts_edges,
    sobel_edges,
    total_loss,
    tv_loss,
)
from efk.fusion import (
    AttentionMap,
    FeatureMap,
    FusionWeights,
    afcm,
    channel_pool,
    conv2d,
    erm,
    ldam,
)
from efk.dataset import (
    BALANCED_CLASSES,
    DEFAULT_VOCABULARY,
    GroundTruthBox,
    Homography,
    SplitSpec,
    apply_class_mode,
    build_split,
    filter_small_boxes,
    parse_annotations,
    parse_annotations_lenient,
    serialize_annotations,
)
from efk.metrics import (
    Detection,
    average_precision,
    evaluate,
    iou,
    map50,
    map5095,
    match_detections,
)
from efk.config import RunConfig

__version__ = "0.1.0"
