import numpy as np

from cefr_fcm import FcmConfig, FcmModel, order_clusters


def base_model(centroids, m=1.5):
    centroids = np.asarray(centroids, dtype=float)
    return FcmModel(centroids, FcmConfig(k=len(centroids), m=m), iterations_used=0, final_shift=0.0, objective=0.0)


def ordered_model(centroids, m=1.5, thresholds=None):
    return order_clusters(base_model(centroids, m), thresholds)
