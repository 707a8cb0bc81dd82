# setup.py
import os
import sys

from dotenv import load_dotenv

from src.utils.data_loader import mnist_paths


def check_setup(data_dir: str = None) -> bool:
    """Check if environment is properly set up"""

    print("Checking environment setup...")

    # Check Python version
    if sys.version_info < (3, 8):
        print("❌ Python 3.8+ required")
        return False
    print("✅ Python version OK")

    load_dotenv()
    data_dir = data_dir or os.getenv("TARGETED_VAE_DATA_DIR", "./data/mnist")

    # Check MNIST files (plain or gzipped)
    missing = [path for path in mnist_paths(data_dir).values()
               if not (os.path.exists(path) or os.path.exists(path + ".gz"))]
    if missing:
        print(f"❌ MNIST files missing from {data_dir}:")
        for path in missing:
            print(f"   {os.path.basename(path)}")
        print("   Run: python -m src.utils.download_dataset")
        return False
    print(f"✅ MNIST dataset found in {data_dir}")

    # Check wandb (optional mirror)
    if os.getenv("TARGETED_VAE_USE_WANDB", "0").lower() in ("1", "true", "yes"):
        if not os.getenv("WANDB_API_KEY"):
            print("⚠️  WANDB_API_KEY not set - you'll need to login interactively")
            print("   Run: wandb login")
        else:
            print("✅ Wandb API key found")

    return True


if __name__ == "__main__":
    if check_setup(sys.argv[1] if len(sys.argv) > 1 else None):
        print("\n✅ Environment setup complete!")
    else:
        print("\n❌ Please fix the issues above before proceeding")
        sys.exit(1)
