"""
Shared test data for the FairRec test suites
"""

import csv
import os

from models.dataset import UNKNOWN, Dataset, GroupVocab, Interaction

CSV_HEADER = ['user_id', 'item_id', 'rating', 'timestamp', 'user_attr', 'model_attr']

# user, item, rating, timestamp, user_attr, model_attr
SMALL_ROWS = [
    ('u1', 'i1', 5.0, 100, 'Small', 'Small'),
    ('u1', 'i2', 4.0, 200, 'Small', 'Small&Large'),
    ('u1', 'i3', 3.0, 300, 'Small', 'Small'),
    ('u2', 'i1', 2.0, 150, 'Large', 'Small'),
    ('u2', 'i2', 4.0, 250, 'Large', 'Small&Large'),
    ('u3', 'i3', 5.0, 120, '', 'Small'),
    ('u3', 'i2', 1.0, 130, '', 'Small&Large'),
]


def build_dataset(rows=SMALL_ROWS, user_labels=('Small', 'Large'), item_labels=('Small', 'Small&Large'),
                  name='fixture'):
    """Dataset from (user, item, rating, timestamp, user_attr, model_attr) tuples"""
    interactions = []
    user_group = {}
    item_group = {}
    for user, item, rating, timestamp, user_attr, model_attr in rows:
        interactions.append(Interaction(user_id=user, item_id=item, rating=float(rating), timestamp=int(timestamp)))
        user_group.setdefault(user, user_attr or UNKNOWN)
        item_group.setdefault(item, model_attr)
    return Dataset.build(
        interactions, user_group, item_group,
        GroupVocab('user identity', tuple(user_labels)),
        GroupVocab('product image', tuple(item_labels)),
        name=name,
    )


def write_rows(path, rows, header=CSV_HEADER):
    """Write raw rows (any values) as a CSV file"""
    with open(path, 'w', encoding='utf-8', newline='') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)
    return path


def read_bytes(path):
    with open(path, 'rb') as fh:
        return fh.read()


def file_names(directory):
    return sorted(os.listdir(directory))
