// Command-line front end: data generation, training, manipulation, metrics.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <optional>

#include "maae/eval.hpp"
#include "maae/image_io.hpp"
#include "maae/rfcover.hpp"
#include "maae/trainer.hpp"

using nlohmann::json;
using namespace maae;

namespace {

Tensor loadImageTensor(const std::string& path) {
    const img::Image8 im = img::readPng(path);
    if (im.channels != 3) throw IoError("expected an RGB image: " + path);
    Tensor t({1, 3, im.height, im.width});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < im.height; ++y)
            for (int x = 0; x < im.width; ++x)
                t.at(0, c, y, x) = static_cast<real>(im.at(y, x, c)) / 255.0;
    return t;
}

void saveImageTensor(const std::string& path, const Tensor& t) {
    const int H = t.dim(2), W = t.dim(3);
    img::Image8 im;
    im.width = W;
    im.height = H;
    im.channels = 3;
    im.pixels.assign(static_cast<std::size_t>(W) * H * 3, 0);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const real v = std::clamp(t.at(0, c, y, x), 0.0, 1.0);
                im.at(y, x, c) = static_cast<std::uint8_t>(std::lround(v * 255.0));
            }
    img::writePng(path, im);
}

json readJsonFile(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    json j;
    in >> j;
    return j;
}

int runRfCover(const std::string& archPath, int inputSize, bool verify) {
    const json arch = readJsonFile(archPath);
    std::vector<rf::LayerSpec> layers;
    for (const auto& l : arch)
        layers.push_back({l.at("kernel").get<int>(), l.at("stride").get<int>(),
                          l.at("padding").get<int>()});
    const rf::RFParams params = rf::composeReceptiveField(layers);
    const int latent = rf::stackOutputSize(layers, inputSize);
    const rf::PixelSet set = rf::minimalCoveringSet(params, inputSize, latent);

    json out;
    out["receptiveField"] = {{"size", params.size}, {"jump", params.jump},
                             {"start", params.start}};
    out["latentSize"] = latent;
    out["axisPositions"] = set.axisPositions;
    json pos2d = json::array();
    for (const auto& [r, c] : set.positions2d) pos2d.push_back({r, c});
    out["positions2d"] = pos2d;
    if (verify) out["covers"] = rf::verifyCoverage(set, params, inputSize);
    std::cout << out.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Face-attribute autoencoder toolkit"};
    app.require_subcommand(1);

    // rf-cover
    std::string archPath;
    int rfInputSize = 32;
    bool rfVerify = false;
    auto* rfCmd = app.add_subcommand("rf-cover",
                                     "Receptive-field composition and minimal pixel cover");
    rfCmd->add_option("--arch", archPath, "JSON list of {kernel,stride,padding}")->required();
    rfCmd->add_option("--input-size", rfInputSize, "Input resolution")->required();
    rfCmd->add_flag("--verify", rfVerify, "Also report coverage verification");

    // generate-data
    data::DatasetConfig dcfg;
    auto* genCmd = app.add_subcommand("generate-data", "Render a synthetic face dataset");
    genCmd->add_option("--out", dcfg.outDir, "Output directory")->required();
    genCmd->add_option("--identities", dcfg.numIdentities, "Number of identities");
    genCmd->add_option("--per-identity", dcfg.samplesPerIdentity, "Samples per identity");
    genCmd->add_option("--size", dcfg.size, "Image size (32 or 64)");
    genCmd->add_option("--seed", dcfg.seed, "RNG seed");
    genCmd->add_option("--test-fraction", dcfg.testFraction, "Held-out fraction");

    // train-classifier
    std::string clfData, clfKind = "attribute", clfOut;
    clf::ClassifierTrainConfig ccfg;
    auto* clfCmd = app.add_subcommand("train-classifier",
                                      "Train the frozen identity/attribute networks");
    clfCmd->add_option("--data", clfData, "Dataset directory")->required();
    clfCmd->add_option("--kind", clfKind, "identity or attribute")
        ->check(CLI::IsMember({"identity", "attribute"}));
    clfCmd->add_option("--out", clfOut, "Output checkpoint path")->required();
    clfCmd->add_option("--epochs", ccfg.epochs, "Training epochs");
    clfCmd->add_option("--batch", ccfg.batchSize, "Batch size");
    clfCmd->add_option("--lr", ccfg.learningRate, "Learning rate");
    clfCmd->add_option("--seed", ccfg.seed, "RNG seed");

    // train
    std::string trainConfigPath, resumePath;
    train::TrainConfig tcfg;
    auto* trainCmd = app.add_subcommand("train", "Train the manipulation model");
    trainCmd->add_option("--config", trainConfigPath, "JSON training config");
    trainCmd->add_option("--data", tcfg.datasetPath, "Dataset directory");
    trainCmd->add_option("--attribute", tcfg.attribute, "Attribute to manipulate");
    auto* epochsOpt = trainCmd->add_option("--epochs", tcfg.epochs, "Training epochs");
    trainCmd->add_option("--batch", tcfg.batchSize, "Batch size (even)");
    trainCmd->add_option("--seed", tcfg.seed, "RNG seed");
    trainCmd->add_option("--out", tcfg.checkpointDir, "Checkpoint directory");
    trainCmd->add_option("--id-extractor", tcfg.idExtractorPath,
                         "Frozen identity network checkpoint");
    trainCmd->add_option("--resume", resumePath, "Checkpoint to resume from");

    // manipulate
    std::string mCkpt, mIn, mOut, mAttr;
    real mDelta = 0;
    auto* manCmd = app.add_subcommand("manipulate", "Apply one attribute shift to an image");
    manCmd->add_option("--checkpoint", mCkpt, "Trained checkpoint")->required();
    manCmd->add_option("--in", mIn, "Input image")->required();
    manCmd->add_option("--out", mOut, "Output image")->required();
    manCmd->add_option("--attribute", mAttr, "Attribute name");
    manCmd->add_option("--delta", mDelta, "Signed shift (0 = reconstruction)");

    // sweep
    std::string sCkpt, sIn, sOut, sAttr;
    int sPoints = 7;
    auto* sweepCmd = app.add_subcommand("sweep", "Render a continuous-shift image grid");
    sweepCmd->add_option("--checkpoint", sCkpt, "Trained checkpoint")->required();
    sweepCmd->add_option("--in", sIn, "Input image")->required();
    sweepCmd->add_option("--out", sOut, "Output grid image")->required();
    sweepCmd->add_option("--attribute", sAttr, "Attribute name");
    sweepCmd->add_option("--points", sPoints, "Number of sweep points");

    // evaluate
    std::string eCkpt, eData, eAttrClf, eIdNet, eOut, eAttr;
    int eMaxImages = 0;
    auto* evalCmd = app.add_subcommand("evaluate", "Compute metrics over the test split");
    evalCmd->add_option("--checkpoint", eCkpt, "Trained checkpoint")->required();
    evalCmd->add_option("--data", eData, "Dataset directory")->required();
    evalCmd->add_option("--attr-classifier", eAttrClf, "Attribute classifier checkpoint")
        ->required();
    evalCmd->add_option("--id-extractor", eIdNet, "Identity network checkpoint")->required();
    evalCmd->add_option("--out", eOut, "Report JSON path")->required();
    evalCmd->add_option("--attribute", eAttr, "Attribute name (default: trained one)");
    evalCmd->add_option("--max-images", eMaxImages, "Cap on evaluated images (0 = all)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (rfCmd->parsed()) return runRfCover(archPath, rfInputSize, rfVerify);

        if (genCmd->parsed()) {
            data::generateDataset(dcfg);
            std::cout << "wrote dataset to " << dcfg.outDir << "\n";
            return 0;
        }

        if (clfCmd->parsed()) {
            const data::Dataset ds = data::Dataset::load(clfData);
            const real acc = clfKind == "identity"
                                 ? clf::trainIdentityClassifier(ds, ccfg, clfOut)
                                 : clf::trainAttributeClassifier(ds, ccfg, clfOut);
            std::cout << clfKind << " classifier held-out accuracy: " << acc << "\n";
            return 0;
        }

        if (trainCmd->parsed()) {
            if (!trainConfigPath.empty()) {
                train::TrainConfig fromFile =
                    train::TrainConfig::fromJson(readJsonFile(trainConfigPath));
                // CLI flags override file values where given.
                if (tcfg.datasetPath.empty()) tcfg.datasetPath = fromFile.datasetPath;
                if (tcfg.checkpointDir.empty()) tcfg.checkpointDir = fromFile.checkpointDir;
                if (tcfg.idExtractorPath.empty())
                    tcfg.idExtractorPath = fromFile.idExtractorPath;
                fromFile.datasetPath = tcfg.datasetPath;
                fromFile.checkpointDir = tcfg.checkpointDir;
                fromFile.idExtractorPath = tcfg.idExtractorPath;
                if (trainCmd->count("--attribute")) fromFile.attribute = tcfg.attribute;
                if (epochsOpt->count()) fromFile.epochs = tcfg.epochs;
                if (trainCmd->count("--batch")) fromFile.batchSize = tcfg.batchSize;
                if (trainCmd->count("--seed")) fromFile.seed = tcfg.seed;
                tcfg = fromFile;
            }
            train::Trainer trainer(tcfg);
            const std::string final =
                trainer.train(resumePath.empty() ? std::nullopt
                                                 : std::optional<std::string>(resumePath));
            std::cout << "final checkpoint: " << final << "\n";
            return 0;
        }

        if (manCmd->parsed()) {
            train::LoadedModel lm = train::loadModel(mCkpt);
            if (mAttr.empty()) mAttr = lm.trainConfig.attribute;
            const Tensor x = loadImageTensor(mIn);
            const Tensor out =
                mDelta == 0
                    ? lm.model->generate(x, std::nullopt)
                    : lm.model->generate(x, lm.model->manipulationSpec(mAttr, mDelta));
            saveImageTensor(mOut, out);
            return 0;
        }

        if (sweepCmd->parsed()) {
            train::LoadedModel lm = train::loadModel(sCkpt);
            if (sAttr.empty()) sAttr = lm.trainConfig.attribute;
            const Tensor x = loadImageTensor(sIn);
            const int sign = lm.model->attributeSign.count(sAttr)
                                 ? lm.model->attributeSign.at(sAttr)
                                 : +1;
            std::vector<real> deltas;
            const int P = std::max(2, sPoints);
            for (int k = 0; k < P; ++k) {
                const real t = -1.0 + 2.0 * static_cast<real>(k) / static_cast<real>(P - 1);
                deltas.push_back(t * lm.model->delta * sign);
            }
            eval::sweepGrid(eval::modelGenerator(*lm.model, sAttr), x, deltas, sOut);
            return 0;
        }

        if (evalCmd->parsed()) {
            train::LoadedModel lm = train::loadModel(eCkpt);
            const data::Dataset ds = data::Dataset::load(eData);
            clf::ConvClassifier attrClf = clf::loadClassifier(eAttrClf);
            clf::ConvClassifier idNet = clf::loadClassifier(eIdNet);
            eval::EvalOptions opts;
            opts.attribute = eAttr.empty() ? lm.trainConfig.attribute : eAttr;
            opts.maxImages = eMaxImages;
            const eval::EvalReport report = eval::evaluate(*lm.model, ds, attrClf, idNet, opts);
            std::ofstream out(eOut);
            out << report.toJson().dump(2) << "\n";
            std::cout << report.toJson().dump(2) << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
