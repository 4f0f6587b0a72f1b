"""Walk through the angle-quantized class codec on a single oriented box.

The codec flattens an oriented label into something a plain axis-aligned
detector can predict: the angle becomes one of k bins folded into an
expanded class id, and decoding rebuilds the oriented box from the
axis-aligned hull plus the object's nominal aspect ratio.
"""
import math

from loopkit import (
    AngleQuantizer,
    Obb,
    decode_prediction,
    encode_label,
    polygon_iou,
)
from loopkit.dataset import default_catalog
from loopkit.encoding import OrientedLabel


def main():
    catalog = default_catalog()
    q = AngleQuantizer.from_degrees(10.0)
    print(f"quantizer: step=10 deg -> k={q.k} bins")
    print(f"expanded classes for {len(catalog)} objects: {len(catalog) * q.k}")

    class_id = 2
    ratio = catalog[class_id].nominal_ratio
    theta = math.radians(37.0)
    box = Obb.from_center_size_angle((160, 120), 30 * ratio, 30, theta)
    label = OrientedLabel.from_obb(box, class_id)
    print(f"\noriginal: class={class_id} theta={math.degrees(theta):.1f} deg "
          f"ratio={ratio:.2f}")

    pred = encode_label(q, label)
    print(f"encoded: expanded_class={pred.expanded_class} "
          f"(= {class_id} * {q.k} + {pred.expanded_class % q.k})")
    print(f"axis-aligned hull: {pred.aabb.w:.1f} x {pred.aabb.h:.1f} px")

    decoded = decode_prediction(q, catalog, pred)
    err_deg = math.degrees(abs(decoded.theta - theta))
    print(f"\ndecoded: class={decoded.class_id} "
          f"theta={math.degrees(decoded.theta):.1f} deg "
          f"(angle error {err_deg:.2f} deg, max possible 5.00)")
    print(f"IoU(decoded, original) = {polygon_iou(decoded.obb, box):.4f}")

    print("\nIoU vs quantization step for the same box:")
    for step in (5, 10, 20, 30, 45):
        qq = AngleQuantizer.from_degrees(step)
        d = decode_prediction(qq, catalog, encode_label(qq, label))
        print(f"  step {step:2d} deg (k={qq.k:3d}): "
              f"IoU={polygon_iou(d.obb, box):.4f}")


if __name__ == "__main__":
    main()
