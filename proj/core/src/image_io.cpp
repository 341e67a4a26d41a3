#include "crossres/image_io.hpp"

#include <cmath>
#include <stdexcept>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace crossres {

Image load_image(const std::filesystem::path& path) {
  const cv::Mat mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (mat.empty()) throw std::runtime_error("load_image: cannot decode " + path.string());
  if (mat.depth() != CV_8U)
    throw std::runtime_error("load_image: only 8-bit images supported: " + path.string());
  const int c = mat.channels() >= 3 ? 3 : 1;

  Image img(mat.rows, mat.cols, c);
  for (int y = 0; y < mat.rows; ++y) {
    const unsigned char* row = mat.ptr<unsigned char>(y);
    for (int x = 0; x < mat.cols; ++x) {
      if (c == 1) {
        img.at(y, x, 0) = row[x * mat.channels()] / 255.0;
      } else {
        // OpenCV stores BGR; expose RGB.
        img.at(y, x, 0) = row[x * mat.channels() + 2] / 255.0;
        img.at(y, x, 1) = row[x * mat.channels() + 1] / 255.0;
        img.at(y, x, 2) = row[x * mat.channels() + 0] / 255.0;
      }
    }
  }
  return img;
}

void save_image(const std::filesystem::path& path, const Image& img) {
  if (img.c != 1 && img.c != 3) throw std::invalid_argument("save_image: channels must be 1 or 3");
  cv::Mat mat(img.h, img.w, img.c == 1 ? CV_8UC1 : CV_8UC3);
  for (int y = 0; y < img.h; ++y) {
    unsigned char* row = mat.ptr<unsigned char>(y);
    for (int x = 0; x < img.w; ++x) {
      for (int ch = 0; ch < img.c; ++ch) {
        const double v = std::clamp(img.at(y, x, img.c == 3 ? 2 - ch : ch), 0.0, 1.0);
        row[x * img.c + ch] = static_cast<unsigned char>(std::lround(v * 255.0));
      }
    }
  }
  if (!cv::imwrite(path.string(), mat))
    throw std::runtime_error("save_image: cannot write " + path.string());
}

}  // namespace crossres
