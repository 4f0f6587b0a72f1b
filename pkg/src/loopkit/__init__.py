"""loopkit: turn any axis-aligned 2D object detector into a planar
(x, y, theta) pose estimator via angle-quantized class expansion.

Subpackages:

- ``geometry``:    oriented/axis-aligned boxes, IoU and oriented IoU,
                   similarity transforms
- ``encoding``:    the angle-quantized class codec and object catalog
- ``propagation``: inter-frame similarity estimation (least squares +
                   RANSAC), corner/NCC matching, label chaining
- ``dataset``:     synthetic scenes and sequences, oracle detector,
                   serialization
- ``evaluation``:  IoU>0.5 matching, PR sweeps, AP/mAP, grouped reports
- ``servo``:       proportional grasp-alignment control laws and simulator
- ``cli``:         the ``loopkit`` command
- ``service``:     HTTP API for the annotation UI
"""

from .geometry import (
    Aabb,
    Obb,
    Similarity2,
    aabb_of_obb,
    obb_angle,
    obb_aspect_ratio,
    oriented_iou,
    polygon_iou,
    reconstruct_obb,
    transform_obb,
)
from .encoding import (
    AngleQuantizer,
    CatalogEntry,
    ObjectCatalog,
    OrientedLabel,
    UnorientedLabel,
    decode_prediction,
    encode_label,
    o2u_class,
    quantize_angle,
    u2o_class,
)

__version__ = "0.1.0"
