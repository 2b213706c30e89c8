"""cle-screen: patch-based carcinoma screening on circular-FOV microscopy images.

Pipeline stages: manifest ingest -> FOV detection and patch extraction ->
CNN patch classification -> probability fusion -> patient-aware evaluation,
plus image-quality analytics, a five-condition experiment runner and a
synthetic corpus generator for end-to-end testing.
"""

__version__ = "1.0.0"

MODEL_FORMAT_VERSION = 1
MANIFEST_COLUMNS = ("image_id", "path", "patient_id", "sequence_id",
                    "dataset_id", "site", "label")
LABELS = ("healthy", "carcinoma")
CARCINOMA = "carcinoma"
HEALTHY = "healthy"
