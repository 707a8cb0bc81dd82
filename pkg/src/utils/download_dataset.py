# src/utils/download_dataset.py
import os
import sys

import requests
from tqdm import tqdm

from .data_loader import MNIST_FILES

BASE_URL = os.getenv("MNIST_MIRROR", "https://ossci-datasets.s3.amazonaws.com/mnist/")


def download_file(url: str, output_path: str, chunk_size: int = 8192):
    response = requests.get(url, stream=True, timeout=60)
    response.raise_for_status()
    total_size = int(response.headers.get('content-length', 0))

    partial = output_path + ".part"
    with open(partial, 'wb') as f:
        with tqdm(total=total_size, unit='B', unit_scale=True,
                  desc=os.path.basename(output_path)) as pbar:
            for chunk in response.iter_content(chunk_size=chunk_size):
                f.write(chunk)
                pbar.update(len(chunk))
    os.replace(partial, output_path)


def download_mnist(data_dir: str = "./data/mnist", base_url: str = BASE_URL):
    """
    Fetch the four gzipped MNIST IDX files; the loader reads the .gz files directly
    """
    os.makedirs(data_dir, exist_ok=True)

    print("Downloading MNIST dataset...")
    for name in MNIST_FILES.values():
        plain = os.path.join(data_dir, name)
        output_path = plain + ".gz"
        if os.path.exists(plain) or os.path.exists(output_path):
            print(f"{name} already exists, skipping...")
            continue
        download_file(base_url + name + ".gz", output_path)

    print("MNIST dataset downloaded successfully!")


if __name__ == "__main__":
    download_mnist(sys.argv[1] if len(sys.argv) > 1 else os.getenv("TARGETED_VAE_DATA_DIR", "./data/mnist"))
